"""Independent oracles shared by the test modules.

Everything here recomputes expected values through a different route than
the library: explicit enumeration, central finite differences, or direct
density arithmetic. Keep these free of calls into the code paths they check.
"""
import itertools
import math

import numpy as np


def finite_difference_gradient(func, x0: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function of a flat vector."""
    x0 = np.asarray(x0, dtype=float)
    grad = np.zeros_like(x0)
    for i in range(x0.size):
        hi = x0.copy()
        lo = x0.copy()
        hi[i] += step
        lo[i] -= step
        grad[i] = (func(hi) - func(lo)) / (2.0 * step)
    return grad


def random_discrete_joint(rng: np.random.Generator) -> dict:
    """A random source/target pair of joints over binary x, z, y that share
    the x-given-(y, z) conditional. Probabilities kept away from 0 and 1."""
    def unit(lo=0.05, hi=0.95):
        return lo + (hi - lo) * rng.random()

    p_z1 = unit()
    p_x1_given_z = {z: unit() for z in (0, 1)}
    p_y1_given_xz = {(x, z): unit() for x in (0, 1) for z in (0, 1)}

    p_joint = {}
    for x, z, y in itertools.product((0, 1), (0, 1), (1, 2)):
        pz = p_z1 if z == 1 else 1.0 - p_z1
        px = p_x1_given_z[z] if x == 1 else 1.0 - p_x1_given_z[z]
        py = p_y1_given_xz[(x, z)] if y == 1 else 1.0 - p_y1_given_xz[(x, z)]
        p_joint[(x, z, y)] = pz * px * py

    # Source conditionals derived from the joint.
    p_y1_given_z = {}
    for z in (0, 1):
        num = sum(p_joint[(x, z, 1)] for x in (0, 1))
        den = sum(p_joint[(x, z, y)] for x in (0, 1) for y in (1, 2))
        p_y1_given_z[z] = num / den

    # Target: new z marginal and new y-given-z, same x-given-(y, z).
    q_z1 = unit()
    q_y1_given_z = {z: unit() for z in (0, 1)}
    q_joint = {}
    for x, z, y in itertools.product((0, 1), (0, 1), (1, 2)):
        p_yz = sum(p_joint[(xx, z, y)] for xx in (0, 1))
        p_x_given_yz = p_joint[(x, z, y)] / p_yz
        qz = q_z1 if z == 1 else 1.0 - q_z1
        qy = q_y1_given_z[z] if y == 1 else 1.0 - q_y1_given_z[z]
        q_joint[(x, z, y)] = qz * qy * p_x_given_yz

    return {
        "p_joint": p_joint,
        "q_joint": q_joint,
        "p_y1_given_xz": p_y1_given_xz,
        "p_y1_given_z": p_y1_given_z,
        "q_y1_given_z": q_y1_given_z,
    }


def bayes_posterior_from_joint(joint: dict, x: int, z: int) -> tuple[float, float]:
    """Exact class posterior at one (x, z) cell by enumeration."""
    p1 = joint[(x, z, 1)]
    p2 = joint[(x, z, 2)]
    total = p1 + p2
    return p1 / total, p2 / total


def enumerate_bernoulli_expectation(theta0: float, slope: float, d_z: int) -> float:
    """E[sigmoid(theta0 + slope * sum(z))] over all 2^d_z equiprobable
    binary patterns, enumerated one by one."""
    total = 0.0
    for pattern in itertools.product((0, 1), repeat=d_z):
        total += 1.0 / (1.0 + math.exp(-(theta0 + slope * sum(pattern))))
    return total / 2.0**d_z


def gaussian_bayes_posterior(point_z, point_x, mixing, offsets, prior_probs) -> np.ndarray:
    """Class posterior at one (z, x) point by direct Gaussian density
    arithmetic: prior(class | z) times the identity-covariance normal density
    of x around mixing @ z + offset[class], renormalized."""
    point_z = np.asarray(point_z, dtype=float)
    point_x = np.asarray(point_x, dtype=float)
    n_classes = offsets.shape[0]
    logs = np.empty(n_classes)
    for c in range(n_classes):
        mean = mixing @ point_z + offsets[c]
        resid = point_x - mean
        logs[c] = math.log(prior_probs[c]) - 0.5 * float(resid @ resid)
    logs -= logs.max()
    w = np.exp(logs)
    return w / w.sum()
