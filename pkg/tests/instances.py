"""Small problem instances shared by the optimizer tests."""

import numpy as np

from hapsnet.association import Association, associate
from hapsnet.channel import ChannelSet, build_channels
from hapsnet.scenario import Topology, Transmitter, User, desk_scenario


def synthetic(H, power_caps, sigma2=1.0, user_tx=None, bandwidth=10e6, min_rate=0.0, weights=None):
    """Topology, channels and association for hand-made channel matrices ``H[i]`` (users x antennas)."""
    H = [np.asarray(Hi, dtype=complex) for Hi in H]
    n_tx, n_u = len(H), H[0].shape[0]
    txs = tuple(Transmitter(i, "BS", i, (float(i), 0.0, 0.025), Hi.shape[1], float(p))
                for i, (Hi, p) in enumerate(zip(H, power_caps)))
    weights = np.ones(n_u) if weights is None else weights
    users = tuple(User(j, (0.0, float(j), 0.0), float(weights[j]), float(min_rate)) for j in range(n_u))
    topo = Topology(txs, users, bandwidth=bandwidth, noise_power=sigma2)
    ch = ChannelSet(H, np.ones((n_tx, n_u)), np.zeros((n_tx, n_u)))
    user_tx = np.zeros(n_u, dtype=int) if user_tx is None else np.asarray(user_tx)
    return topo, ch, Association.from_user_tx(user_tx, n_tx)


def random_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def desk_instance(seed, n_haps=1, n_users=8, **kwargs):
    topo = desk_scenario(n_haps, n_users, seed, **kwargs)
    ch = build_channels(topo, seed=seed)
    return topo, ch, associate(topo, ch)
