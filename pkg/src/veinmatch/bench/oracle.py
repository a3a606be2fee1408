"""Straight-line transcription of the MMD filter, kept free of any shared helper.

Used only as the reference side of differential tests against
``veinmatch.vision.geomfilter.mmd_filter``.
"""

import math

from veinmatch.models.filtering import MmdDecision, MmdParams, MmdStats
from veinmatch.models.matches import MatchSet


def mmd_oracle(
    matches: MatchSet,
    query_coords: list[tuple[float, float]],
    gallery_coords: list[tuple[float, float]],
    params: MmdParams,
) -> MmdDecision:
    n = len(matches.pairs)
    if n == 0:
        return MmdDecision(image_accepted=False, n_pairs=0)

    d_x = []
    d_y = []
    for pair in matches.pairs:
        x_g, y_g = gallery_coords[pair.gallery_idx]
        x_p, y_p = query_coords[pair.query_idx]
        dx = float(x_g) - float(x_p)
        dy = float(y_g) - float(y_p)
        if not params.signed_distances:
            dx = abs(dx)
            dy = abs(dy)
        d_x.append(dx)
        d_y.append(dy)

    mu_x = math.fsum(d_x) / n
    mu_y = math.fsum(d_y) / n
    med_x = sorted(d_x)[(n - 1) // 2]
    med_y = sorted(d_y)[(n - 1) // 2]

    n_low = 0
    n_high = 0
    for i in range(n):
        if d_x[i] <= mu_x and d_y[i] <= mu_y:
            n_low += 1
        if d_x[i] > mu_x and d_y[i] > mu_y:
            n_high += 1

    stats = MmdStats(
        d_x=d_x,
        d_y=d_y,
        mu_x=mu_x,
        mu_y=mu_y,
        med_x=med_x,
        med_y=med_y,
        n_low=n_low,
        n_high=n_high,
        signed=params.signed_distances,
    )

    gate = False
    if n_low >= n_high:
        gate = True
    if mu_x <= params.t_mu and mu_y <= params.t_mu:
        gate = True
    if med_x <= mu_x and med_y <= mu_y:
        gate = True
    if not gate:
        return MmdDecision(image_accepted=False, stats=stats, n_pairs=n)

    accepted = []
    for i in range(n):
        if params.inclusive_bounds:
            ok = d_x[i] <= mu_x and d_x[i] <= params.t_d and d_y[i] <= mu_y and d_y[i] <= params.t_d
        else:
            ok = d_x[i] < mu_x and d_x[i] < params.t_d and d_y[i] < mu_y and d_y[i] < params.t_d
        if ok:
            accepted.append(matches.pairs[i])
    return MmdDecision(image_accepted=True, accepted=accepted, stats=stats, n_pairs=n)
