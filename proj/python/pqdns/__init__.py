"""Double-signed DNSSEC with application-layer fragmentation."""

from ._pqdns import (
    Error,
    bench,
    combos,
    count_fragments,
    decode,
    key_tag,
    make_query,
    roundtrip,
    sizes,
)

__all__ = [
    "Error",
    "bench",
    "combos",
    "count_fragments",
    "decode",
    "key_tag",
    "make_query",
    "roundtrip",
    "sizes",
]
