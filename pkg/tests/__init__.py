"""Tests for contact-hybrid."""
