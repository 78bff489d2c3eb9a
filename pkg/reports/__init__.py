"""Exports of bench results."""
