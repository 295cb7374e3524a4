"""Contract tests for contact-hybrid."""
