"""Experiment specs, runners, plots and the command-line entry point."""
