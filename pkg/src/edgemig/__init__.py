"""Mobility-driven edge service migration: analytic chain metrics, MDP
migration policies, and a deterministic discrete-event simulator with
LISP-style and SDN-style control planes."""

__version__ = "0.1.0"
