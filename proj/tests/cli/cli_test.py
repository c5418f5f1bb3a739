"""End-to-end checks of the warmrnn command line tool."""
import csv
import json
import os
import subprocess
import sys
import tempfile

import jsonschema

CLI, SCHEMA = sys.argv[1], sys.argv[2]
failures = []


def check(cond, what):
    if not cond:
        failures.append(what)
        print("FAIL:", what)


def run(args):
    return subprocess.run([CLI] + args, capture_output=True, text=True)


def write(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f)


def rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


schema = json.load(open(SCHEMA))
work = tempfile.mkdtemp(prefix="warmrnn-cli-")

tiny = {
    "task": "copy",
    "seeds": [1, 2, 3],
    "data": {"length": 8, "train_samples": 40, "test_samples": 20},
    "network": {"cell": "gru", "layers": [4]},
    "warmup": {"mode": "full", "steps": 3, "batch_size": 8, "max_stabilization": 10, "optimizer": "adam"},
    "train": {"epochs": 2, "batch_size": 10, "record_wall_time": False,
              "probe": {"period": 1, "states": 8, "stabilization": 20}},
}
cfg = os.path.join(work, "tiny.json")
write(cfg, tiny)

# train: three seeds, schema, aggregated mean/std
out = os.path.join(work, "train")
p = run(["train", cfg, "--out", out, "-q"])
check(p.returncode == 0, "train exits 0: " + p.stderr)
summary = json.load(open(os.path.join(out, "summary.json")))
try:
    jsonschema.validate(summary, schema)
except jsonschema.ValidationError as e:
    check(False, "train summary validates: " + e.message)
check(summary["complete"] and len(summary["runs"]) == 3, "three seed runs recorded")
loss = summary["metrics"]["final_test_loss"]
vals = [r["metrics"]["final_test_loss"] for r in summary["runs"]]
mean = sum(vals) / 3
std = (sum((v - mean) ** 2 for v in vals) / 2) ** 0.5
check(loss["count"] == 3, "metric count is 3")
check(abs(loss["mean"] - mean) <= 1e-12 * max(1.0, abs(mean)), "summary mean matches runs")
check(abs(loss["std"] - std) <= 1e-12 * max(1.0, std), "summary std is the sample std")
for s in (1, 2, 3):
    d = os.path.join(out, "seed-%d" % s)
    for name in ("metrics.csv", "warmup.csv", "params.ckpt"):
        check(os.path.exists(os.path.join(d, name)), "seed %d writes %s" % (s, name))
m = rows(os.path.join(out, "seed-1", "metrics.csv"))
check(m[0] == ["epoch", "split", "loss", "accuracy", "vaa", "wall_time_s"], "metrics header")
w = rows(os.path.join(out, "seed-1", "warmup.csv"))
check(w[0] == ["step", "sampled_m", "layer", "vaa_star", "loss"], "warmup header")
check(len(w) == 1 + 3, "one warmup row per step for one layer")

# determinism: rerun gives byte-identical CSVs
out2 = os.path.join(work, "train-again")
run(["train", cfg, "--out", out2, "-q"])
for name in ("metrics.csv", "warmup.csv"):
    a = open(os.path.join(out, "seed-2", name), "rb").read()
    b = open(os.path.join(out2, "seed-2", name), "rb").read()
    check(a == b, "rerun reproduces " + name)

# overrides, seeds and scale reach the resolved config
out3 = os.path.join(work, "scaled")
p = run(["warmup", cfg, "--out", out3, "--seeds", "5", "--scale", "0.5",
         "--set", "network.layers=[6,4]", "--set", "warmup.steps=2", "-q"])
check(p.returncode == 0, "warmup exits 0: " + p.stderr)
s3 = json.load(open(os.path.join(out3, "summary.json")))
jsonschema.validate(s3, schema)
check(s3["scale"] == 0.5, "scale recorded in summary")
check(s3["config"]["network"]["layers"] == [3, 2], "widths scaled")
check(s3["config"]["data"]["train_samples"] == 20, "samples scaled")
check([r["seed"] for r in s3["runs"]] == [5], "seed override")
w = rows(os.path.join(out3, "seed-5", "warmup.csv"))
check(len(w) == 1 + 2 * 2, "warmup rows = steps x layers")
check([r[2] for r in w[1:]] == ["0", "1", "0", "1"], "warmup layer column")

# vaa-probe rows
probe = dict(tiny, task="vaa-probe", seeds=[0],
             probe={"states": 10, "stabilization": 30, "iterations": 2})
probe["data"] = dict(tiny["data"], source="denoise", forgetting=5, length=12)
pcfg = os.path.join(work, "probe.json")
write(pcfg, probe)
p = run(["vaa-probe", pcfg, "--out", os.path.join(work, "probe"), "-q"])
check(p.returncode == 0, "vaa-probe exits 0: " + p.stderr)
pr = rows(os.path.join(work, "probe", "seed-0", "metrics.csv"))
check(pr[0] == ["step", "layer", "vaa", "vaa_star", "states", "m", "epsilon"], "probe header")
check(len(pr) == 1 + 2 * 2, "probe rows = iterations x (network + layers)")

# rl on a tiny maze
rl = {"task": "tmaze", "seeds": [0], "maze": {"length": 2},
      "network": {"layers": [4]},
      "rl": {"episodes": 5, "buffer_capacity": 200, "batch_size": 4, "updates_per_episode": 2}}
rcfg = os.path.join(work, "rl.json")
write(rcfg, rl)
p = run(["rl", rcfg, "--out", os.path.join(work, "rl"), "-q"])
check(p.returncode == 0, "rl exits 0: " + p.stderr)
jsonschema.validate(json.load(open(os.path.join(work, "rl", "summary.json"))), schema)
rr = rows(os.path.join(work, "rl", "seed-0", "metrics.csv"))
check(len(rr) == 1 + 5, "rl rows = episodes + header")

# gradcheck
p = run(["gradcheck", rcfg, "--set", "task=gradcheck", "--out", os.path.join(work, "gc"), "-q"])
check(p.returncode == 0, "gradcheck exits 0: " + p.stderr)
g = json.load(open(os.path.join(work, "gc", "summary.json")))
jsonschema.validate(g, schema)
check(g["runs"][0]["metrics"]["all_passed"] == 1.0, "gradchecks pass")

# report
p = run(["report", os.path.join(out, "summary.json")])
check(p.returncode == 0 and "final_test_loss" in p.stdout, "report prints metrics")

# validation errors exit 1 and name the field
bad = os.path.join(work, "bad.json")
write(bad, {"task": "sorting"})
p = run(["train", bad])
check(p.returncode == 1 and "task" in p.stderr, "unknown task exits 1 naming the field")
p = run(["train", cfg, "--set", "train.epochz=3"])
check(p.returncode == 1 and "train.epochz" in p.stderr, "unknown key exits 1 naming the field")
p = run(["vaa-probe", pcfg, "--set", "data.forgetting=2"])
check(p.returncode == 1 and "data.forgetting" in p.stderr, "bad probe data exits 1 naming the field")
p = run(["rl", cfg])
check(p.returncode == 1, "rl on a supervised task exits 1")
p = run(["train"])
check(p.returncode == 1, "missing config exits 1")

# runtime failures exit 2
blocker = os.path.join(work, "file")
open(blocker, "w").close()
p = run(["train", cfg, "--out", os.path.join(blocker, "sub"), "-q"])
check(p.returncode == 2, "unwritable output exits 2")
mn = dict(tiny, task="pmnist", data={"directory": os.path.join(work, "no-mnist")})
mcfg = os.path.join(work, "mnist.json")
write(mcfg, mn)
p = run(["train", mcfg, "--out", os.path.join(work, "mnist"), "-q"])
check(p.returncode == 2, "missing MNIST files exit 2")

print("cli: %d failure(s)" % len(failures))
sys.exit(1 if failures else 0)
