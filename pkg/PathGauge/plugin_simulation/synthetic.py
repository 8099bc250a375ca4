import numpy as np

from PathGauge.application.config import PROBE_INTERVAL_SECONDS
from PathGauge.domain.record import BITS_PER_BYTE, DelayRecord, Direction
from PathGauge.domain.simulation import DelayModel, SimConfig, SizeClass
from PathGauge.plugin_simulation.monte_carlo import ExponentialDelayModel

PAIR_SPACING_SECONDS: float = 0.001


def generate_records(
    config: SimConfig,
    pairs: int,
    direction: Direction,
    small_size: int,
    start_time: float = 0.0,
    interval: float = PROBE_INTERVAL_SECONDS,
    model: DelayModel = ExponentialDelayModel(),
) -> list[DelayRecord]:
    """Synthesize the records of a probe run with known ground truth.

    The k-th pair consists of a small and a large packet with sequence id k, sent
    `PAIR_SPACING_SECONDS` apart at `start_time + k * interval`. The large packet
    size follows from `small_size` and the config's size difference.

    Raises:
        ValueError: if the size difference is not a whole number of bytes or
            `pairs` is not positive.

    Returns:
        list[DelayRecord]: small and large records alternating in send order.
    """
    if pairs < 1:
        raise ValueError("number of pairs must be greater equal 1")
    if config.delta_w % BITS_PER_BYTE:
        raise ValueError(f"delta_w {config.delta_w} is not a whole number of bytes")
    large_size = small_size + config.delta_w // BITS_PER_BYTE
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.rng_seed))
    small_delays = model.draw(rng, config, SizeClass.SMALL, pairs)
    large_delays = model.draw(rng, config, SizeClass.LARGE, pairs)
    records: list[DelayRecord] = []
    for seq_id, (small_delay, large_delay) in enumerate(
        zip(small_delays, large_delays)
    ):
        send_time = round(start_time + seq_id * interval, 6)
        records.append(
            DelayRecord(seq_id, direction, small_size, send_time, float(small_delay))
        )
        records.append(
            DelayRecord(
                seq_id,
                direction,
                large_size,
                round(send_time + PAIR_SPACING_SECONDS, 6),
                float(large_delay),
            )
        )
    return records
