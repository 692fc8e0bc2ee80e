"""Decentralized gain/phase stability analysis for power networks."""
