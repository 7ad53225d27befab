"""Accountable city report platform.

Citizens file street-problem reports whose existence and handling are traced
on a small consortium ledger.  A pseudorandomly chosen auditor may redact
parts of a report via redactable signatures without breaking the on-chain
commitments, and every later state change is logged and replayable.
"""

__version__ = "0.1.0"
