"""Resource identifier generation for content-addressed storage, plus a
deterministic IPFS-like network simulator for studying it."""

__version__ = "0.1.0"

from .cidcodec import CidV0, base58_decode, base58_encode, cid_from_value, cid_to_value, parse_cid
from .modfield import FieldPoly, lagrange_interpolate, mod_inv, poly_eval
from .rigacore import (
    PRODUCTION_PRIME,
    AnchorSet,
    Campaign,
    CounterDomain,
    SkewedPrng,
    build_name_riga,
    build_skewed_prng,
    plan_campaign,
    uri_at,
    uri_stream,
)

__all__ = [
    "__version__",
    "CidV0",
    "base58_decode",
    "base58_encode",
    "cid_from_value",
    "cid_to_value",
    "parse_cid",
    "FieldPoly",
    "lagrange_interpolate",
    "mod_inv",
    "poly_eval",
    "PRODUCTION_PRIME",
    "AnchorSet",
    "Campaign",
    "CounterDomain",
    "SkewedPrng",
    "build_name_riga",
    "build_skewed_prng",
    "plan_campaign",
    "uri_at",
    "uri_stream",
]
