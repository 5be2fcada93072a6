"""Test suite for cbsde."""
