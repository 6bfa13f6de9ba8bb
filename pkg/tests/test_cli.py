import numpy as np
import pytest

from skydiver import formats
from skydiver.cli import build_parser, load_input, main
from skydiver.snn import SpikeTrain, network_forward
from skydiver.synth import generate_network


@pytest.fixture
def net_path(tmp_path):
    p = tmp_path / "net.json"
    assert main(["gen", "--layers", "12x8x3-4C3-8C3-4C3", "--seed", "1", "--out", str(p)]) == 0
    return p


def _args(net_path, *extra):
    return ["--net", str(net_path), "--input", "random", "--timesteps", "10", "--seed", "2", *extra]


def test_gen_classification_shape(tmp_path):
    p = tmp_path / "c.skyb"
    assert main(["gen", "--layers", "16c-32c-8c", "--seed", "0", "--out", str(p)]) == 0
    net = formats.load_network(p)
    assert [l.out_channels for l in net.layers] == [16, 32, 8]
    assert net.input_shape == (1, 28, 28)


def test_gen_deterministic(tmp_path):
    for d in ("a", "b"):
        main(["gen", "--layers", "8C3-16C3", "--seed", "5", "--out", str(tmp_path / d / "n.json")])
    for f in ("n.json", "n.skyb"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_gen_rejects_bad_spec(tmp_path):
    assert main(["gen", "--layers", "0C3", "--seed", "0", "--out", str(tmp_path / "n.json")]) == 4


def test_run_conserves_work(net_path, tmp_path):
    totals = {}
    for sched in ("baseline", "cbws"):
        out = tmp_path / sched
        assert main(["run", *_args(net_path, "--schedule", sched, "--aprc", "on", "--out-dir", str(out))]) == 0
        rep = formats.read_report_json(out / "report.json")
        totals[sched] = (rep.total_work, rep.total_cycles)
        assert (out / "report.csv").exists()
    assert totals["baseline"][0] == totals["cbws"][0]


def test_run_zero_timesteps(net_path, tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["run", "--net", str(net_path), "--input", "random", "--timesteps", "0", "--seed", "1"])
    assert e.value.code == 2
    assert not list(tmp_path.glob("**/report.json"))


def test_run_missing_timesteps_is_usage_error(net_path):
    assert main(["run", "--net", str(net_path), "--input", "random", "--seed", "1"]) == 2


def test_exit_codes_for_bad_files(tmp_path, net_path):
    assert main(["run", *_args(tmp_path / "missing.json")]) == 3
    blob = net_path.with_suffix(".skyb")
    blob.write_bytes(blob.read_bytes()[:-1])
    assert main(["run", *_args(net_path)]) == 3


def test_run_aprc_beats_unpadded_on_average(tmp_path):
    # per-layer mean balance of cbws with and without the full-padding transform
    on, off = [], []
    for seed in range(6):
        p = tmp_path / f"n{seed}.json"
        main(["gen", "--layers", "16x12x3-8C3-16C3-16C3", "--seed", str(seed), "--sigma", "1.0",
              "--fan-in-scaled", "--out", str(p)])
        for mode, acc in (("on", on), ("off", off)):
            out = tmp_path / f"{seed}{mode}"
            main(["run", "--net", str(p), "--input", "random", "-T", "30", "--seed", str(seed),
                  "--schedule", "cbws", "--aprc", mode, "--out-dir", str(out), "--hw", "N=4"])
            acc.append(formats.read_report_json(out / "report.json").to_dict()["mean_balance_ratio"])
    assert np.mean(on) >= np.mean(off)


def test_compare_matrix(net_path, tmp_path):
    out = tmp_path / "cmp.csv"
    assert main(["compare", *_args(net_path, "--out", str(out), "--hw", "N=2")]) == 0
    rows = formats.read_csv(out)
    assert len(rows) == 4 * 4  # four modes, three layers plus a total row each
    for aprc in ("off", "on"):
        per = {r["mode"]: r for r in rows if r["aprc"] == aprc and r["layer"] == "all"}
        works = {r["total_work"] for r in per.values()}
        assert len(works) == 1
        b, c = per[f"baseline/aprc-{aprc}"], per[f"cbws/aprc-{aprc}"]
        assert float(c["throughput_ratio"]) == pytest.approx(
            int(b["latency_cycles"]) / int(c["latency_cycles"]), abs=1e-6)


def test_compare_byte_identical(net_path, tmp_path):
    for name in ("a", "b"):
        assert main(["compare", *_args(net_path, "--out", str(tmp_path / f"{name}.csv"))]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_compare_bad_matrix(net_path, tmp_path):
    assert main(["compare", *_args(net_path, "--matrix", "foo:bar", "--out", str(tmp_path / "x.csv"))]) == 4


def test_profile_silent(tmp_path, net_path):
    tr = SpikeTrain(np.zeros((4, 3, 12, 8), bool))
    formats.save_spike_trace(tr, tmp_path / "z.spk")
    out = tmp_path / "p.csv"
    assert main(["profile", "--net", str(net_path), "--input", str(tmp_path / "z.spk"), "--seed", "0",
                 "--out", str(out)]) == 0
    assert all(float(r["spikerate"]) == 0 for r in formats.read_csv(out))


def test_profile_pass_through(tmp_path):
    p = tmp_path / "id.json"
    net = generate_network("6x6-1C1", 0)
    net.layers[0].weights[...] = 1.0
    formats.save_network(net, p)
    tr = SpikeTrain(np.random.default_rng(0).random((8, 1, 6, 6)) < 0.25)
    formats.save_spike_trace(tr, tmp_path / "t.spk")
    out = tmp_path / "p.csv"
    main(["profile", "--net", str(p), "--input", str(tmp_path / "t.spk"), "--seed", "0", "--out", str(out)])
    rows = {(r["layer"], r["channel"]): r for r in formats.read_csv(out)}
    assert float(rows[("0", "all")]["spikerate"]) == pytest.approx(tr.bits.mean(), abs=1e-6)


def test_profile_matches_forward_counts(net_path, tmp_path):
    out = tmp_path / "p.csv"
    assert main(["profile", *_args(net_path, "--out", str(out))]) == 0
    rows = formats.read_csv(out)
    net = formats.load_network(net_path)
    tr = load_input(build_parser().parse_args(["profile", *_args(net_path)]), net)
    _, counts = network_forward(net, tr)
    for l, c in enumerate(counts):
        got = [int(r["spikes"]) for r in rows if r["layer"] == str(l) and r["channel"] != "all"]
        assert got == c.sum(axis=0).tolist()
    assert all(0 <= float(r["spikerate"]) <= 1 for r in rows)


def test_proportion_and_env_out_dir(net_path, tmp_path, monkeypatch):
    monkeypatch.setenv("SKYDIVER_OUT", str(tmp_path / "env"))
    assert main(["proportion", *_args(net_path, "--aprc", "on")]) == 0
    rows = formats.read_csv(tmp_path / "env" / "proportion.csv")
    assert set(rows[0]) == {"layer", "channel", "magnitude", "spikes", "rank"}
