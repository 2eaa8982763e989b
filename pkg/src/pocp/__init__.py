"""Feasibility, bounds and reformulations for p-order cone systems."""
