"""Traveling modulating pulses in periodic media."""
