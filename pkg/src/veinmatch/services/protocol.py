"""Evaluation protocol: identity-stratified dev/eval split and template enrollment.

Left and right hands of a subject are separate identities. The split permutes
the sorted identity list with a seeded generator, so it depends only on the
manifest contents and the seed.
"""

import math

import numpy as np

from veinmatch.errors import EnrollmentError, ParameterError, ProtocolError
from veinmatch.models.evaluation import (
    MAX_TEMPLATE_SIZE,
    DatasetManifest,
    Enrollment,
    Identity,
    Sample,
    Template,
)


def build_protocol_split(
    manifest: DatasetManifest,
    dev_fraction: float = 0.2,
    seed: int = 0,
) -> tuple[DatasetManifest, DatasetManifest]:
    """Return (dev, eval) manifests; each identity lands wholly in one of them.

    The dev partition holds round(dev_fraction * identities) identities,
    rounding halves up.
    """
    if not (0.0 < dev_fraction < 1.0):
        raise ParameterError(f"dev_fraction must lie in (0, 1), got {dev_fraction}")
    identities = manifest.identities()
    n_dev = int(math.floor(dev_fraction * len(identities) + 0.5))
    if n_dev < 1 or n_dev >= len(identities):
        raise ProtocolError(
            f"{len(identities)} identities cannot be split with dev_fraction {dev_fraction}: "
            "both partitions need at least one identity"
        )
    order = np.random.default_rng(seed).permutation(len(identities))
    dev = [identities[int(i)] for i in order[:n_dev]]
    evaluation = [identities[int(i)] for i in order[n_dev:]]
    return manifest.subset(dev), manifest.subset(evaluation)


def enroll(
    identity: Identity,
    samples: list[Sample],
    template_size: int,
    probe_start: int | None = None,
) -> Enrollment:
    """The first ``template_size`` samples by index form the template; the rest are probes.

    ``probe_start`` holds probes back to samples from that position on, so
    templates of different sizes can be scored against one probe set.
    """
    if not (1 <= template_size <= MAX_TEMPLATE_SIZE):
        raise EnrollmentError(f"template size must lie in [1, {MAX_TEMPLATE_SIZE}], got {template_size}")
    foreign = [sample.sample_id for sample in samples if sample.identity != identity]
    if foreign:
        raise EnrollmentError(f"samples {foreign} do not belong to {identity.key}")
    first_probe = max(template_size, probe_start or 0)
    if len(samples) <= first_probe:
        raise EnrollmentError(
            f"{identity.key} has {len(samples)} samples; template size {template_size} leaves no probe"
        )
    ordered = sorted(samples, key=lambda sample: sample.sample_index)
    template = Template(identity=identity, members=[sample.features for sample in ordered[:template_size]])
    return Enrollment(template=template, probes=ordered[first_probe:])


def enroll_all(samples: list[Sample], template_size: int, probe_start: int | None = None) -> list[Enrollment]:
    """Enroll every identity present in ``samples``, ordered by identity."""
    grouped: dict[Identity, list[Sample]] = {}
    for sample in samples:
        grouped.setdefault(sample.identity, []).append(sample)
    return [
        enroll(identity, grouped[identity], template_size, probe_start)
        for identity in sorted(grouped, key=Identity.sort_key)
    ]
