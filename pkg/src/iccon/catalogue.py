"""Zipf content catalogue, UE interest profiles and request sampling.

Content identifiers are popularity ranks ``1..C``; rank 1 is the most
popular item. All samplers take an explicit ``numpy.random.Generator`` so a
run is a pure function of its seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

MAX_PROFILE_ATTEMPTS = 1000


def _cumulative(weights):
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return cdf


@dataclass(frozen=True, eq=False)
class ZipfCatalogue:
    """Items ``1..C`` with ``p_i = i**-s / H``.

    ``p[i - 1]`` is the probability of rank ``i``; ``cdf`` is the matching
    cumulative table used for binary-search sampling.
    """

    C: int
    s: float
    H: float
    p: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)

    def prob(self, rank):
        return float(self.p[rank - 1])


def build_catalogue(C, s):
    """Build a Zipf catalogue of ``C`` items with slope ``s``."""
    if int(C) != C or C < 1:
        raise ConfigError(f"catalogue size must be a positive integer, got {C!r}")
    if not s >= 0:
        raise ConfigError(f"Zipf slope must be non-negative, got {s!r}")
    C = int(C)
    ranks = np.arange(1, C + 1, dtype=np.float64)
    w = ranks ** (-float(s))
    H = float(np.sum(w))
    p = w / H
    p.flags.writeable = False
    cdf = _cumulative(p)
    cdf.flags.writeable = False
    return ZipfCatalogue(C=C, s=float(s), H=H, p=p, cdf=cdf)


def sample_items(catalogue, rng, size):
    """Draw ``size`` ranks i.i.d. from the catalogue's popularity law."""
    u = rng.random(size)
    idx = np.searchsorted(catalogue.cdf, u, side="right")
    return np.minimum(idx, catalogue.C - 1) + 1


def sample_item(catalogue, rng):
    return int(sample_items(catalogue, rng, 1)[0])


@dataclass(frozen=True, eq=False)
class UeProfile:
    """A UE's interest set and its request law.

    ``items`` is sorted by rank, so ``weights`` is non-increasing: each
    weight is the item's global Zipf probability renormalized over the set.
    """

    items: np.ndarray
    weights: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)

    @property
    def size(self):
        return len(self.items)

    @property
    def item_set(self):
        return frozenset(self.items.tolist())

    def __eq__(self, other):
        if not isinstance(other, UeProfile):
            return NotImplemented
        return np.array_equal(self.items, other.items)

    def __hash__(self):
        return hash(self.item_set)


def make_profile(catalogue, items):
    """Build a profile over ``items`` using the catalogue's global weights."""
    items = np.unique(np.asarray(list(items), dtype=np.int64))
    if items.size == 0:
        raise ConfigError("a profile needs at least one item")
    if items[0] < 1 or items[-1] > catalogue.C:
        raise ConfigError(f"profile items must lie in [1, {catalogue.C}]")
    w = catalogue.p[items - 1]
    weights = w / np.sum(w)
    items.flags.writeable = False
    weights.flags.writeable = False
    return UeProfile(items=items, weights=weights, cdf=_cumulative(weights))


def generate_profiles(catalogue, U, u, rng):
    """Draw ``U`` mutually distinct profiles of ``u`` uniform items each.

    Items are chosen uniformly without replacement; a profile equal to an
    earlier one is redrawn, at most ``MAX_PROFILE_ATTEMPTS`` times.
    """
    C = catalogue.C
    if U < 1:
        raise ConfigError(f"profile count U must be >= 1, got {U}")
    if not 1 <= u <= C:
        raise ConfigError(f"profile size u must lie in [1, {C}], got {u}")
    seen = set()
    profiles = []
    for _ in range(U):
        for _attempt in range(MAX_PROFILE_ATTEMPTS):
            items = np.sort(rng.choice(C, size=u, replace=False)) + 1
            key = items.tobytes()
            if key not in seen:
                break
        else:
            raise ConfigError(
                f"could not draw {U} distinct profiles of size {u} from {C} items"
            )
        seen.add(key)
        profiles.append(make_profile(catalogue, items))
    return profiles


def profile_assignment_law(U, s):
    """Zipf(s) law over profile indices ``1..U``."""
    return build_catalogue(U, s)


def assign_profile(profiles, rng, s):
    """Pick profile ``j`` (1-based) with probability ``j**-s / sum_k k**-s``."""
    if not profiles:
        raise ConfigError("no profiles to assign from")
    j = sample_item(profile_assignment_law(len(profiles), s), rng)
    return profiles[j - 1]


def sample_requests(profile, rng, size):
    u = rng.random(size)
    idx = np.minimum(np.searchsorted(profile.cdf, u, side="right"), profile.size - 1)
    return profile.items[idx]


def sample_request(profile, rng):
    """Draw one item from the profile according to its request weights."""
    return int(sample_requests(profile, rng, 1)[0])
