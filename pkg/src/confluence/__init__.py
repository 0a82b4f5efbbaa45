"""Confluence of Fuchsian singularities: monodromy, Stokes data and limit checks."""
