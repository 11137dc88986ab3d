"""Small scenario configs shared by the tests."""

import copy

ALL = ["p_pv", "q_pv", "p_batt", "q_batt", "p_w", "q_w", "p_n", "q_n"]


def two_bus_config(load_kw=500.0, load_kvar=0.0, duration=2.0, seed=1, attacks=()):
    """Slack + one constant-power load, no inverters, stiff upstream."""
    return {
        "seed": seed,
        "duration": duration,
        "buses": [{"id": 1, "kind": "slack"}, {"id": 2}],
        "lines": [{"from": 1, "to": 2, "r": 0.01, "x": 0.02}],
        "devices": [{"id": "load", "kind": "load", "bus": 2, "p_channel": "p_n", "q_channel": "q_n",
                     "n_p": 0.0, "n_q": 0.0}],
        "profiles": {"load": {"samples": [[0.0, load_kw, load_kvar]]}},
        "attacks": list(attacks),
    }


def small_config(duration=30.0, seed=3, attacks=None):
    """Four-bus feeder with two inverters and a load, weak upstream grid."""
    cfg = {
        "seed": seed,
        "duration": duration,
        "grid": {"voltage": 1.02, "r": 0.01, "x": 0.04, "walk_sigma": 0.002, "walk_tau": 60.0},
        "buses": [{"id": 1, "kind": "slack"}, {"id": 2}, {"id": 3}, {"id": 4}],
        "lines": [{"from": 1, "to": 2, "r": 0.02, "x": 0.015},
                  {"from": 2, "to": 3, "r": 0.025, "x": 0.018},
                  {"from": 2, "to": 4, "r": 0.015, "x": 0.01}],
        "devices": [
            {"id": "pv", "kind": "inverter", "bus": 3, "p_channel": "p_pv", "q_channel": "q_pv"},
            {"id": "wind", "kind": "inverter", "bus": 4, "p_channel": "p_w", "q_channel": "q_w"},
            {"id": "consumer", "kind": "load", "buses": [2, 4], "shares": [0.5, 0.5],
             "p_channel": "p_n", "q_channel": "q_n", "n_p": 1.5, "n_q": 2.0},
        ],
        "profiles": {
            "pv": {"synthetic": {"p_mean": 300.0, "p_std": 40.0, "tau": 10.0, "jitter": 2.0, "p_min": 0.0}},
            "wind": {"synthetic": {"p_mean": 150.0, "p_std": 40.0, "tau": 5.0, "jitter": 3.0, "p_min": 0.0}},
            "consumer": {"synthetic": {"p_mean": 500.0, "p_std": 50.0, "tau": 20.0, "jitter": 3.0,
                                       "q_ratio": 0.3}},
        },
        "attacks": [
            {"kind": "scale", "targets": ["p_pv"], "start": duration * 0.5, "end": duration * 0.75,
             "magnitude": 1.5},
        ] if attacks is None else attacks,
    }
    return copy.deepcopy(cfg)
