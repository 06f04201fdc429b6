"""Multifractal spectra of almost additive potentials on mixing subshifts."""
