"""Hand-execution of the tri_basic fixture, independent of the dystasim package.

Reads the fixture CSVs with the csv module only and replays them step by
step, writing every scheduler invocation (time, trigger, per-request scores,
pick) and the final metrics to tests/fixtures/tri_basic_expected.json.

Rules reproduced here:
  * one layer per dispatch; the scheduler runs at every layer completion and
    when arrivals reach an idle accelerator; arrivals during a layer wait for
    its end, arrivals exactly at the end join before the decision
  * Dysta, idle dispatch: score = (Lat + beta * (window - Lat)) in ms
  * Dysta, layer completion: gamma = observed density of the last executed
    layer / profiled density of that layer (1 before any layer, clamped to
    [0.05, 20]); rem = alpha * gamma * profiled remaining latency;
    slack = window - rem; wait = time since the request's last layer ended
    (or since arrival); penalty = wait / (alpha * gamma * profiled total) / |queue|;
    score = (rem + eta * slack) in ms + eta * penalty
  * lowest score wins; ties keep the request that just ran, else lowest id
  * SJF: profiled remaining latency; FCFS: non-preemptive arrival order
  * PREMA with priorities (1, 4, 9): waiting requests gain
    priority * waited / profiled total tokens; candidates hold at least the
    highest queued priority; shortest profiled remaining wins; the picked
    request's tokens reset to its priority when it is switched in
Run: python tests/oracles/tri_basic_oracle.py
"""
import csv
import json
import math
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
FIX = ROOT / "src" / "dystasim" / "data" / "fixtures" / "tri_basic"
OUT = ROOT / "tests" / "fixtures" / "tri_basic_expected.json"

BETA = ETA = 0.5
ALPHA = 1.0
MS = 1e-3
PRIORITIES = {0: 1, 1: 4, 2: 9}


def read_rows(name):
    with open(FIX / name, newline="") as fh:
        return list(csv.DictReader(fh))


def load():
    traces, profiles = {}, {}
    for r in read_rows("traces.csv"):
        traces.setdefault((r["model_name"], r["sample_id"]), []).append(
            (int(r["layer_idx"]), float(r["latency_s"]), float(r["sparsity"])))
    for r in read_rows("profiles.csv"):
        profiles.setdefault(r["model_name"], []).append(
            (int(r["layer_idx"]), float(r["latency_s"]), float(r["sparsity"])))
    reqs = []
    for r in read_rows("workload.csv"):
        layers = sorted(traces[(r["model_name"], r["sample_id"])])
        prof = sorted(profiles[r["model_name"]])
        reqs.append({
            "id": int(r["request_id"]), "arrival": float(r["arrival_s"]), "deadline": float(r["deadline_s"]),
            "lat": [l for _, l, _ in layers], "sp": [s for _, _, s in layers],
            "plat": [l for _, l, _ in prof], "psp": [s for _, _, s in prof],
        })
    return sorted(reqs, key=lambda r: (r["arrival"], r["id"]))


def prof_remaining(r, nxt):
    return sum(r["plat"][nxt:])


def tie_pick(scores, running):
    best = min(scores.values())
    ties = [i for i, s in scores.items() if s == best]
    return running if running in ties else min(ties)


def dysta(queue, now, trigger, running, state):
    scores = {}
    for r in queue:
        window = r["deadline"] - r["arrival"]
        if trigger == "arrival":
            lat = sum(r["plat"])
            scores[r["id"]] = (lat + BETA * (window - lat)) / MS
            continue
        nxt = r["next"]
        if nxt == 0:
            gamma = 1.0
        else:
            gamma = (1 - r["sp"][nxt - 1]) / (1 - r["psp"][nxt - 1])
            gamma = min(max(gamma, 0.05), 20.0)
        rem = ALPHA * gamma * prof_remaining(r, nxt)
        isol = ALPHA * gamma * sum(r["plat"])
        slack = window - rem
        since = r["last_end"] if r["last_end"] is not None else r["arrival"]
        penalty = (now - since) / isol / len(queue)
        scores[r["id"]] = (rem + ETA * slack) / MS + ETA * penalty
    return tie_pick(scores, running), scores


def sjf(queue, now, trigger, running, state):
    scores = {r["id"]: prof_remaining(r, r["next"]) for r in queue}
    return tie_pick(scores, running), scores


def fcfs(queue, now, trigger, running, state):
    if running is not None:
        return running, None
    return min(queue, key=lambda r: (r["arrival"], r["id"]))["id"], None


def prema(queue, now, trigger, running, state):
    tok, seen = state.setdefault("tokens", {}), state.setdefault("seen", {})
    for r in queue:
        i = r["id"]
        if i not in tok:
            tok[i] = float(PRIORITIES[i])
            seen[i] = r["arrival"]
        if i != running:
            tok[i] += PRIORITIES[i] * (now - seen[i]) / sum(r["plat"])
        seen[i] = now
    thr = max(PRIORITIES[r["id"]] for r in queue)
    cands = {r["id"]: prof_remaining(r, r["next"]) for r in queue if tok[r["id"]] >= thr}
    pick = tie_pick(cands, running)
    if pick != running:
        tok[pick] = float(PRIORITIES[pick])
    return pick, dict(tok)


def simulate(policy):
    reqs = load()
    for r in reqs:
        r.update(next=0, last_end=None, completion=None, preempted=0)
    pending = list(reqs)
    queue = []
    now = 0.0
    running = None
    state = {}
    log = []

    def admit(upto, inclusive):
        while pending and (pending[0]["arrival"] <= upto if inclusive else pending[0]["arrival"] < upto):
            queue.append(pending.pop(0))

    while queue or pending:
        if not queue:
            now = max(now, pending[0]["arrival"])
            admit(now, True)
            trigger, running = "arrival", None
        else:
            trigger = "layer_complete"
        pick, scores = policy(queue, now, trigger, running, state)
        log.append({"time": now, "trigger": trigger, "pick": pick,
                    "scores": None if scores is None else {str(k): v for k, v in sorted(scores.items())}})
        if running is not None and pick != running:
            next(r for r in queue if r["id"] == running)["preempted"] += 1
        r = next(q for q in queue if q["id"] == pick)
        end = now + r["lat"][r["next"]]
        admit(end, False)
        now = end
        r["next"] += 1
        r["last_end"] = end
        if r["next"] == len(r["lat"]):
            r["completion"] = now
            queue.remove(r)
            running = None
        else:
            running = pick
        admit(now, True)

    out = []
    for r in sorted(reqs, key=lambda r: r["id"]):
        iso = sum(r["lat"])
        ta = r["completion"] - r["arrival"]
        out.append({"id": r["id"], "completion": r["completion"], "turnaround": ta, "t_isol": iso,
                    "normalized_turnaround": ta / iso, "violated": ta > r["deadline"] - r["arrival"],
                    "preemptions": r["preempted"]})
    antt = sum(x["normalized_turnaround"] for x in out) / len(out)
    viol = sum(x["violated"] for x in out) / len(out)
    stp = len(out) / (max(x["completion"] for x in out) - min(r["arrival"] for r in reqs))
    return {"invocations": log, "requests": out, "antt": antt, "violation_rate": viol, "stp": stp,
            "dispatch": [e["pick"] for e in log]}


def main():
    result = {name: simulate(fn) for name, fn in
              (("dysta", dysta), ("sjf", sjf), ("fcfs", fcfs), ("prema", prema))}
    result["_config"] = {"beta": BETA, "eta": ETA, "alpha": ALPHA, "coeff_strategy": "last_one",
                         "score_unit_s": MS, "prema_priorities": PRIORITIES}
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(result, indent=1) + "\n")
    print(f"wrote {OUT}", file=sys.stderr)


if __name__ == "__main__":
    main()
