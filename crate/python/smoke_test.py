"""Smoke test for the twinverify Python module.

Build and install first:
    cd crates/py && maturin develop --release
Then run:
    python python/smoke_test.py
"""

import json

import twinverify


def check_backends():
    ids = twinverify.backend_ids()
    assert {"pong-ref", "pong-perf", "cartpole-ref", "cartpole-perf"} <= set(ids), ids
    ref, perf = twinverify.Backend("pong-ref"), twinverify.Backend("pong-perf")
    assert (ref.env, ref.obs_len) == ("pong", perf.obs_len)

    (s_ref, o_ref), (s_perf, o_perf) = ref.reset(7), perf.reset(7)
    assert o_ref == o_perf and s_ref == s_perf
    for t in range(200):
        action = t % ref.action_count
        s_ref, o_ref, r_ref, d_ref = ref.step(s_ref, action)
        s_perf, o_perf, r_perf, d_perf = perf.step(s_perf, action)
        assert (o_ref, r_ref, d_ref) == (o_perf, r_perf, d_perf), t
        if d_ref:
            break
    assert s_ref == twinverify.State.from_json(s_ref.to_json())
    fields = dict(s_ref.fields())
    path = next(iter(fields))
    assert s_ref.field(path) == fields[path]


def check_batch():
    cart = twinverify.Backend("cartpole-perf")
    batch = cart.batch(16, seed=3)
    assert len(batch) == 16
    batch.step([1] * 16)
    assert len(batch.observations()) == 16 * cart.obs_len
    assert len(batch.rewards()) == len(batch.dones()) == 16
    batch.reset_done()
    assert batch.state(0).env == "cartpole"


def check_verification():
    suites = twinverify.run_suites("pong-perf")
    assert suites["l1"]["passed"] == suites["l1"]["cases"]
    assert suites["l2"]["passed"] == suites["l2"]["cases"]

    same = twinverify.compare_rollouts("pong-ref", "pong-perf", episodes=10)
    assert same["divergence"] is None and same["episodes_matched"] == 10

    drift = twinverify.compare_rollouts("pong-ref", "pong-mut-vx-decay", episodes=10)
    assert drift["divergence"] is not None
    assert "Divergence" in drift["repair_prompt"]


def check_statistics():
    a = [100.0 + 0.1 * i for i in range(30)]
    b = [100.05 + 0.1 * i for i in range(30)]
    result = twinverify.tost(a, b, delta=1.0)
    assert result["equivalent"], result
    sps = twinverify.measure_sps("pong-perf", 64, steps_per_run=200_000, n_runs=2)
    assert sps["timing"]["mean_sps"] > 0


def main():
    check_backends()
    check_batch()
    check_verification()
    check_statistics()
    report = twinverify.transfer("pong", gate_episodes=10)
    print(json.dumps({"transfer_equivalent": report["equivalent"]}))
    print("smoke test passed")


if __name__ == "__main__":
    main()
