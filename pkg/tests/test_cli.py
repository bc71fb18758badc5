"""Command-line behavior: argument plumbing, file formats, exit codes."""

import csv
import json

import numpy as np
import pytest

import commtrack.cli as cli
from commtrack.cli import SweepSpec, _parse_pct_list, _parse_seeds, main, run_sweep
from commtrack.errors import InputError, InternalInvariantError
from commtrack.graph import read_edge_tsv, read_partition_tsv
from commtrack.louvain import LouvainConfig, louvain_static, renumber_partition
from commtrack.metrics import MatchConfig, compare
from commtrack.synth import SynthSpec, generate


def test_parse_pct_list():
    assert _parse_pct_list("0,25,50,75,100", "p") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert _parse_pct_list("12.5", "p") == [0.125]
    with pytest.raises(InputError):
        _parse_pct_list("0,120", "p")
    with pytest.raises(InputError):
        _parse_pct_list("abc", "p")
    with pytest.raises(InputError):
        _parse_pct_list(",", "p")


def test_parse_seeds():
    assert _parse_seeds("1..4") == [1, 2, 3, 4]
    assert _parse_seeds("7") == [7]
    assert _parse_seeds("3,9,12") == [3, 9, 12]
    with pytest.raises(InputError):
        _parse_seeds("9..3")
    with pytest.raises(InputError):
        _parse_seeds("one,two")


def test_sweep_spec_validation():
    SweepSpec([0.0], [0.0], [1])
    with pytest.raises(InputError):
        SweepSpec([], [0.0], [1])
    with pytest.raises(InputError):
        SweepSpec([0.0], [1.5], [1])
    with pytest.raises(InputError):
        SweepSpec([0.0], [0.0], [1], r=0.5)


def _write_pair(tmp_path, seed=6):
    spec = SynthSpec(n_nodes=150, n_communities=6, p_in=0.35, p_out=0.02,
                     churn_rate=0.1, migrate_rate=0.05, steps=2, seed=seed)
    (g0, _), (g1, _) = generate(spec)
    from commtrack.graph import write_edge_tsv

    p0, p1 = tmp_path / "g0.tsv", tmp_path / "g1.tsv"
    write_edge_tsv(g0, p0)
    write_edge_tsv(g1, p1)
    return p0, p1, g0, g1


def test_synth_then_detect_then_compare(tmp_path):
    out = tmp_path / "syn"
    rc = main(["synth", "--nodes", "120", "--communities", "5", "--p-in", "0.3",
               "--p-out", "0.02", "--churn", "0.1", "--migrate", "0.05",
               "--steps", "2", "--seed", "3", "-o", str(out)])
    assert rc == 0
    assert (out / "step_0.graph.tsv").exists()
    assert (out / "step_1.planted.tsv").exists()

    part0 = tmp_path / "p0.tsv"
    rc = main(["detect", "--graph", str(out / "step_0.graph.tsv"), "--seed", "1",
               "-o", str(part0)])
    assert rc == 0

    part1 = tmp_path / "p1.tsv"
    rc = main(["detect", "--graph", str(out / "step_1.graph.tsv"),
               "--prev-partition", str(part0), "--p", "0.5", "--q", "0.2",
               "--seed", "2", "-o", str(part1)])
    assert rc == 0

    report_path = tmp_path / "rep.json"
    rc = main(["compare", "--prev", str(part0), "--next", str(part1),
               "--graph", str(out / "step_1.graph.tsv"), "-o", str(report_path)])
    assert rc == 0
    report = json.loads(report_path.read_text())
    assert report["n_common"] > 0
    assert 0.0 <= report["mi_nats"]
    assert report["modularity_next"] is not None


def test_detect_output_is_loadable_partition(tmp_path):
    p0, _, g0, _ = _write_pair(tmp_path)
    out = tmp_path / "part.tsv"
    assert main(["detect", "--graph", str(p0), "--seed", "4", "-o", str(out)]) == 0
    g = read_edge_tsv(p0)
    part = read_partition_tsv(out, graph=g)
    assert part.covers(g)


def test_detect_deterministic_bytes(tmp_path):
    p0, _, _, _ = _write_pair(tmp_path)
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    main(["detect", "--graph", str(p0), "--seed", "9", "-o", str(a)])
    main(["detect", "--graph", str(p0), "--seed", "9", "-o", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_sweep_csv_shape_and_determinism(tmp_path):
    p0, p1, _, _ = _write_pair(tmp_path)
    out1, out2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    args = ["sweep", "--graph-t", str(p0), "--graph-t1", str(p1),
            "--p", "0,50,100", "--q", "0,100", "--seeds", "1..3"]
    assert main(args + ["-o", str(out1)]) == 0
    assert main(args + ["-o", str(out2)]) == 0

    rows1 = list(csv.reader(out1.read_text().splitlines()))
    rows2 = list(csv.reader(out2.read_text().splitlines()))
    assert rows1[0] == ["p_pct", "q_pct", "seed", "mi_nats", "matching_count",
                        "modularity", "runtime_ms"]
    assert len(rows1) == 1 + 3 * 2 * 3
    # deterministic apart from the timing column
    strip = lambda rows: [r[:-1] for r in rows]
    assert strip(rows1) == strip(rows2)
    # deterministic row order: (p, q, seed)
    keys = [(float(r[0]), float(r[1]), int(r[2])) for r in rows1[1:]]
    assert keys == sorted(keys)


def test_sweep_baseline_row_matches_library(tmp_path):
    p0, p1, g0, g1 = _write_pair(tmp_path)
    out = tmp_path / "s.csv"
    assert main(["sweep", "--graph-t", str(p0), "--graph-t1", str(p1),
                 "--p", "0", "--q", "0", "--seeds", "5", "-o", str(out)]) == 0
    rows = list(csv.reader(out.read_text().splitlines()))[1:]
    assert len(rows) == 1
    mi_csv = float(rows[0][3])

    # recompute through the library over the TSV round-trip (string node ids)
    gt = read_edge_tsv(p0)
    gt1 = read_edge_tsv(p1)
    base = renumber_partition(louvain_static(gt, LouvainConfig(rng_seed=5))[0])
    results = run_sweep(gt, gt1, SweepSpec([0.0], [0.0], [5]))
    assert results[0].mi_nats == pytest.approx(mi_csv, abs=1e-15)
    from commtrack.louvain import DynamicContext, derive_seed, louvain_dynamic

    ctx = DynamicContext.from_previous(base, gt1, 0.0, 0.0, seed=derive_seed(5, 2))
    part, _ = louvain_dynamic(gt1, ctx, LouvainConfig(rng_seed=derive_seed(5, 3)))
    report = compare(base, part, gt1, MatchConfig(0.51))
    assert report.mi_nats == pytest.approx(mi_csv, abs=1e-15)


def test_sweep_rejects_disjoint_graphs(tmp_path):
    a = tmp_path / "a.tsv"
    b = tmp_path / "b.tsv"
    a.write_text("x1\tx2\n", encoding="utf-8")
    b.write_text("y1\ty2\n", encoding="utf-8")
    rc = main(["sweep", "--graph-t", str(a), "--graph-t1", str(b),
               "--p", "0", "--q", "0", "--seeds", "1", "-o", str(tmp_path / "o.csv")])
    assert rc == 2


def test_track_builds_timeline(tmp_path):
    out = tmp_path / "syn"
    main(["synth", "--nodes", "100", "--communities", "5", "--p-in", "0.35",
          "--p-out", "0.02", "--churn", "0.1", "--migrate", "0.05",
          "--steps", "3", "--seed", "8", "-o", str(out)])
    tl_dir = tmp_path / "tl"
    for k in range(3):
        rc = main(["track", "--timeline", str(tl_dir), "--add",
                   str(out / f"step_{k}.graph.tsv"), "--p", "0.5", "--seed", "11"])
        assert rc == 0
    assert (tl_dir / "step_2.partition.tsv").exists()
    history = (tl_dir / "history.jsonl").read_text().strip().splitlines()
    assert len(history) == 2
    meta = json.loads((tl_dir / "meta.json").read_text())
    assert meta["n_steps"] == 3


def test_ingest_command(tmp_path):
    cdr = tmp_path / "x.csv"
    cdr.write_text(
        "origin,target,timestamp,kind,duration_s\n"
        "A,B,2012-03-05T10:00:00,call,62\n"
        "B,A,2012-02-10T09:00:00,sms,0\n"
        "A,C,2012-03-01T08:00:00,call,10\n",
        encoding="utf-8",
    )
    out = tmp_path / "g.tsv"
    rc = main(["ingest", "--cdr", str(cdr), "--month", "2012-03", "-o", str(out)])
    assert rc == 0
    g = read_edge_tsv(out)
    assert sorted(g.ids.ids) == ["A", "B"]
    assert g.n_edges == 1


def test_exit_code_2_on_bad_input(tmp_path):
    rc = main(["detect", "--graph", str(tmp_path / "missing.tsv"),
               "-o", str(tmp_path / "o.tsv")])
    assert rc == 2
    bad = tmp_path / "bad.tsv"
    bad.write_text("a\tb\tnotaweight\n", encoding="utf-8")
    rc = main(["detect", "--graph", str(bad), "-o", str(tmp_path / "o.tsv")])
    assert rc == 2


def test_exit_code_3_on_internal_invariant(tmp_path, monkeypatch):
    p0, p1, _, _ = _write_pair(tmp_path)

    def boom(*args, **kwargs):
        raise InternalInvariantError("cached state drifted")

    monkeypatch.setattr(cli, "run_sweep", boom)
    rc = main(["sweep", "--graph-t", str(p0), "--graph-t1", str(p1),
               "--p", "0", "--q", "0", "--seeds", "1", "-o", str(tmp_path / "o.csv")])
    assert rc == 3
