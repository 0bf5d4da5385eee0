from typing import Dict, Optional

from app.core.config import settings
from app.core.errors import InvalidArgumentError
from app.core.rng import RngStream
from app.models.lattice_models import (
    InitialData,
    InitialDataKind,
    ParticleConfig,
    Window,
    bernoulli_block,
    check_window,
)
import logging

logger = logging.getLogger(__name__)

# Bounds the search for the k-th occupied site of lazily extended data
MAX_TAG_SEARCH = 1_000_000


class InitialDataService:
    @staticmethod
    def make_step_initial(n: int) -> InitialData:
        """Step data: every path enters through the y-axis"""
        if n < 1:
            raise InvalidArgumentError(f"n must be positive, got {n}")
        return InitialData(kind=InitialDataKind.STEP, bits=((0, 1),) * n)

    @staticmethod
    def sample_bernoulli_initial(b1: float, b2: float, n: int, rng: RngStream) -> InitialData:
        """
        Double-sided (b1, b2)-Bernoulli data: y bits with mean b1, x bits with mean b2.

        Bits are drawn in blocks keyed by (seed, stream_id, path, block) so that reading
        past index n extends the same realization.
        """
        for name, value in (("b1", b1), ("b2", b2)):
            if not 0.0 <= value <= 1.0:
                raise InvalidArgumentError(f"{name} must lie in [0, 1], got {value}")
        if n < 1:
            raise InvalidArgumentError(f"n must be positive, got {n}")
        if not isinstance(rng, RngStream):
            raise InvalidArgumentError("Bernoulli data needs an RngStream so it can be extended reproducibly")

        block_size = settings.LAZY_BLOCK_SIZE
        stream = RngStream(seed=rng.seed, stream_id=rng.stream_id, path=rng.path)
        bits = []
        for block in range((n + block_size - 1) // block_size):
            bits.extend(bernoulli_block(b1, b2, stream, block, block_size))
        logger.debug(f"Sampled {n} Bernoulli bit pairs (b1={b1}, b2={b2}, stream={rng.stream_id}{rng.path})")
        return InitialData(
            kind=InitialDataKind.DOUBLE_BERNOULLI,
            bits=tuple(bits[:n]),
            b1=b1,
            b2=b2,
            seed=rng.seed,
            stream_id=rng.stream_id,
            path=rng.path,
            block_size=block_size,
        )

    @staticmethod
    def explicit_initial(bits) -> InitialData:
        return InitialData(kind=InitialDataKind.EXPLICIT, bits=tuple(tuple(pair) for pair in bits))

    @staticmethod
    def realize(phi_spec, n: int, rng: RngStream) -> InitialData:
        """Initial data of one replica from a PhiSpec; Bernoulli data is drawn from ``rng``"""
        if phi_spec.kind == InitialDataKind.STEP:
            return InitialDataService.make_step_initial(n)
        if phi_spec.kind == InitialDataKind.DOUBLE_BERNOULLI:
            return InitialDataService.sample_bernoulli_initial(phi_spec.b1, phi_spec.b2, n, rng)
        return InitialDataService.explicit_initial(phi_spec.bits)

    @staticmethod
    def asep_config_from_initial(phi: InitialData, window: Window) -> ParticleConfig:
        """
        ASEP configuration with initial data phi: site i > 0 holds a red particle iff
        phi_i^(x) = 1, site i <= 0 a blue particle iff phi_{1-i}^(y) = 1.
        """
        lo, hi = check_window(window)
        if phi.kind == InitialDataKind.EXPLICIT:
            needed = phi.last_nonzero_index()
            if needed and not (lo <= 1 - needed and needed <= hi):
                raise InvalidArgumentError(
                    f"window [{lo}, {hi}] does not cover [{1 - needed}, {needed}] where phi has particles"
                )

        blue_sites = [i for i in range(lo, min(hi, 0) + 1) if phi.y_bit(1 - i) == 1]
        red_sites = [i for i in range(max(lo, 1), hi + 1) if phi.x_bit(i) == 1]
        site_tags: Dict[int, int] = {}
        for k, site in enumerate(reversed(blue_sites)):
            site_tags[site] = -1 - k
        for k, site in enumerate(red_sites):
            site_tags[site] = k
        return ParticleConfig.from_tagged_sites(site_tags, (lo, hi))

    @staticmethod
    def offset_config_from_initial(phi: InitialData, hi: int) -> ParticleConfig:
        """Time-0 offset six-vertex configuration: red particles at i in [1, hi] with phi_i^(x) = 1"""
        if hi < 1:
            raise InvalidArgumentError(f"hi must be positive, got {hi}")
        red_sites = [i for i in range(1, hi + 1) if phi.x_bit(i) == 1]
        return ParticleConfig.from_sorted_sites(red_sites, 0, (0, hi))

    @staticmethod
    def initial_position(phi: InitialData, tag: int, limit: Optional[int] = None) -> int:
        """X_tag(0) for the ASEP with initial data phi"""
        limit = limit or MAX_TAG_SEARCH
        count = 0
        if tag < 0:
            for s in range(1, limit + 1):
                count += phi.y_bit(s)
                if count == -tag:
                    return 1 - s
        else:
            for i in range(1, limit + 1):
                count += phi.x_bit(i)
                if count == tag + 1:
                    return i
        raise InvalidArgumentError(f"tag {tag} not found within {limit} sites of the origin")


initial_data_service = InitialDataService()
