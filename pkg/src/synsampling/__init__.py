"""Emulation of a reward-based synaptic sampling network on an accelerator-equipped many-core chip."""

__version__ = "0.1.0"
