"""Risk-limiting audit planning for multi-seat STV elections."""

from .assertions import Assertion, Assorter, ConversionError, Kind, MalformedAssertion, TransferBounds, to_assorter
from .ballots import Ballot, Election, ElectionError, droop_quota, load_election, parse_election, projection, tau_max
from .planner import AuditPlan, Pricer, dual_loop_audit, plan_audit, straight_iqx_audit
from .risk import AsnEstimate, AsnParams, alpha_martingale, estimate_asn
from .tabulate import TabulationOutcome, tabulate

__all__ = [
    "Assertion",
    "Assorter",
    "AsnEstimate",
    "AsnParams",
    "AuditPlan",
    "Ballot",
    "ConversionError",
    "Election",
    "ElectionError",
    "Kind",
    "MalformedAssertion",
    "Pricer",
    "TabulationOutcome",
    "TransferBounds",
    "alpha_martingale",
    "droop_quota",
    "dual_loop_audit",
    "estimate_asn",
    "load_election",
    "parse_election",
    "plan_audit",
    "projection",
    "straight_iqx_audit",
    "tabulate",
    "tau_max",
    "to_assorter",
]
