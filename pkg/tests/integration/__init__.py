"""Integration tests for contact-hybrid."""
