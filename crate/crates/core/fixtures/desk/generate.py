"""Regenerates the desk-scale fixture: articles, recorded completions, daily
returns and factors for 30 fictional firms over 150 trading days.

Planted structure (what the pipeline should find):
  * "FDA approved <firm> drug" lifts the firm's next-day return by +2%.
  * "SEC sued <firm>" cuts it by 2%.
  * OPEC output cuts hit several energy firms on the same day; returns of the
    energy sector share a common shock in the days around those dates.

Usage: python3 generate.py   (writes next to this file; stdlib only)
"""

import csv
import datetime as dt
import hashlib
import json
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))
rng = random.Random(20240611)

SECTORS = {
    "energy": ["Helix Energy", "Cobalt Petroleum", "Northwind Oil", "Redstone Gas", "Tidewater Fuels",
               "Summit Drilling", "Prairie Pipeline"],
    "pharma": ["Aster Therapeutics", "Bluefin Biologics", "Corvid Pharma", "Delta Genomics", "Evergreen Labs",
               "Fjord Medicines", "Granite Bio"],
    "tech": ["Quantum Circuits", "Lumen Software", "Nimbus Cloud", "Orion Devices", "Pixel Systems",
             "Vector Semis", "Zephyr Networks", "Kite Robotics"],
    "banks": ["Harbor Bancorp", "Keystone Financial", "Liberty Trust", "Meridian Bank", "Pioneer Capital",
              "Sterling Savings", "Union Lending", "Wessex Credit"],
}
SECTOR_ENTITIES = {
    "energy": ["OPEC", "Saudi Aramco", "Department of Energy"],
    "pharma": ["Food and Drug Administration", "Medicare", "World Health Organization"],
    "tech": ["TSMC", "European Commission", "Apple"],
    "banks": ["Federal Reserve", "Treasury Department", "Moody's"],
}
GENERIC = ["China", "Congress", "Wall Street analysts", "shareholders", "labor union", "Germany"]
NEUTRAL_ACTIONS = ["met with", "discussed", "praised", "visited", "criticized", "hired", "signed", "reviewed",
                   "expanded into", "partnered with", "announced", "launched"]
FILLER = [
    "Shares were little changed in early trading.",
    "The company did not respond to a request for comment.",
    "Analysts expect more details at the next earnings call.",
    "The announcement came after markets closed.",
]


def link(name):
    return "http://dbpedia.org/resource/" + name.replace(" ", "_")


def business_days(start, n):
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def sentence(subj, action, obj, firm):
    tail = rng.choice(["on {w}", "this week", "according to people familiar with the matter",
                       "in a statement", "citing {f} executives"]).format(
        w=rng.choice(["Monday", "Tuesday", "Wednesday", "Thursday", "Friday"]), f=firm)
    return f"{subj} {action} {obj} {tail}."


def event(subj, action, obj, ctx, links=True):
    return {"subject": subj, "subject_link": link(subj) if links else None, "action": action,
            "object": obj, "object_link": link(obj) if links else None, "context": ctx}


def main():
    firms = []
    sector_of = {}
    for sector, names in SECTORS.items():
        for name in names:
            sid = 10001 + len(firms)
            firms.append((sid, name))
            sector_of[sid] = sector
    days = business_days(dt.date(2022, 1, 3), 151)
    trade_days = days[:150]
    shock_days = set(rng.sample(range(20, 140), 10))
    energy = [sid for sid, _ in firms if sector_of[sid] == "energy"]

    articles, replay = [], {}
    effect = {}  # (day index, stock) -> planted next-day return
    n = 0

    def add_article(i, sid, name, events, garbage=False, duplicate_of=None):
        nonlocal n
        n += 1
        if duplicate_of is not None:
            text = duplicate_of + " (Updated)"
        else:
            text = " ".join([e["context"] for e in events] + [rng.choice(FILLER)])
        articles.append({"id": f"a{n:05d}", "date": trade_days[i].isoformat(), "stock_id": sid, "text": text})
        key = hashlib.sha256(text.encode()).hexdigest()
        replay[key] = "I'm sorry, I can't help with that." if garbage else json.dumps(events, indent=1)
        return text

    for i in range(len(trade_days)):
        opec_cut = i in shock_days
        hit = set(rng.sample(energy, 4)) if opec_cut else set()
        for sid, name in firms:
            sector = sector_of[sid]
            if sid not in hit and rng.random() > 0.3:
                continue
            events = []
            if sid in hit:
                ctx = sentence("OPEC", "cut", "oil output", name)
                events.append(event("OPEC", "cut", "oil output", ctx))
                effect[(i, sid)] = effect.get((i, sid), 0.0) + 0.01
            for _ in range(rng.randint(1, 3)):
                r = rng.random()
                if sector == "pharma" and r < 0.12:
                    ctx = sentence("Food and Drug Administration", "approved", f"{name} drug", name)
                    events.append(event("Food and Drug Administration", "approved", f"{name} drug", ctx))
                    effect[(i, sid)] = effect.get((i, sid), 0.0) + 0.02
                elif r < 0.18:
                    ctx = sentence("Securities and Exchange Commission", "sued", name, name)
                    events.append(event("Securities and Exchange Commission", "sued", name, ctx))
                    effect[(i, sid)] = effect.get((i, sid), 0.0) - 0.02
                else:
                    subj = name if rng.random() < 0.6 else rng.choice(SECTOR_ENTITIES[sector])
                    obj = rng.choice(SECTOR_ENTITIES[sector] + GENERIC + [nm for s2, nm in firms if sector_of[s2] == sector])
                    if obj == subj:
                        obj = rng.choice(GENERIC)
                    action = rng.choice(NEUTRAL_ACTIONS)
                    events.append(event(subj, action, obj, sentence(subj, action, obj, name)))
            garbage = rng.random() < 0.01
            text = add_article(i, sid, name, events, garbage=garbage)
            if not garbage and rng.random() < 0.03:
                add_article(i, sid, name, events, duplicate_of=text)

    with open(os.path.join(HERE, "articles.jsonl"), "w") as f:
        for a in articles:
            f.write(json.dumps(a) + "\n")
    with open(os.path.join(HERE, "replay.json"), "w") as f:
        json.dump(replay, f, indent=0, sort_keys=True)

    # Daily returns: market + sector + idiosyncratic noise, planted effects on
    # the day after the news, and a common energy shock around OPEC cuts.
    sectors = sorted(SECTORS)
    with open(os.path.join(HERE, "returns.csv"), "w", newline="") as f, \
            open(os.path.join(HERE, "factors.csv"), "w", newline="") as g:
        w = csv.writer(f)
        w.writerow(["date", "stock_id", "ret"])
        fw = csv.writer(g)
        fw.writerow(["date", "mktrf", "smb", "hml", "rmw", "cma", "rf"])
        for j, d in enumerate(days):
            mkt = rng.gauss(0.0003, 0.008)
            sec = {s: rng.gauss(0.0, 0.004) for s in sectors}
            near_shock = any(abs(j - (s + 1)) <= 1 for s in shock_days)
            energy_common = rng.gauss(0.0, 0.02) if near_shock else 0.0
            fw.writerow([d.isoformat(), round(mkt, 6), round(rng.gauss(0, 0.004), 6), round(rng.gauss(0, 0.004), 6),
                         round(rng.gauss(0, 0.003), 6), round(rng.gauss(0, 0.003), 6), 0.00002])
            for sid, _ in firms:
                r = mkt + sec[sector_of[sid]] + rng.gauss(0.0, 0.012)
                if sector_of[sid] == "energy":
                    r += energy_common
                if j > 0:
                    r += effect.get((j - 1, sid), 0.0)
                w.writerow([d.isoformat(), sid, round(r, 6)])


if __name__ == "__main__":
    main()
