"""Unit tests for contact-hybrid."""
