"""Synthetic ground truth: correspondence scenes, oracles, sweeps and rendered palms."""
