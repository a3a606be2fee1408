"""Orchestration services for extraction, enrollment and evaluation."""
