#!/usr/bin/env python3
"""Generate a synthetic multi-family kinship graph with 12 relations.

Usage: make_family.py <out-dir> [families] [seed]

Relations: brother, sister, father, mother, son, daughter, husband, wife,
uncle, aunt, nephew, niece.  A triple r(a, b) reads "a is the r of b".
"""
import os
import random
import sys


class World:
    def __init__(self, rng):
        self.rng = rng
        self.people = []  # (name, gender)
        self.parents = {}
        self.spouse = {}

    def person(self, gender):
        pid = len(self.people)
        self.people.append(("p%04d" % pid, gender))
        self.parents[pid] = None
        return pid

    def marry(self, a, b):
        self.spouse[a] = b
        self.spouse[b] = a


def grow(world, generations):
    rng = world.rng
    f, m = world.person("m"), world.person("f")
    world.marry(f, m)
    couples = [(f, m)]
    for gen in range(generations):
        nxt = []
        for dad, mom in couples:
            for _ in range(rng.choice([1, 2, 2, 3, 3, 4])):
                child = world.person(rng.choice("mf"))
                world.parents[child] = (dad, mom)
                if gen + 1 < generations and rng.random() < 0.8:
                    partner = world.person("f" if world.people[child][1] == "m" else "m")
                    world.marry(child, partner)
                    pair = (child, partner) if world.people[child][1] == "m" else (partner, child)
                    nxt.append(pair)
        couples = nxt


def triples(world):
    out = set()
    name = lambda p: world.people[p][0]
    male = lambda p: world.people[p][1] == "m"
    children = {}
    for c, ps in world.parents.items():
        if ps:
            for p in ps:
                children.setdefault(p, []).append(c)
    siblings = {}
    for p, cs in children.items():
        for a in cs:
            siblings.setdefault(a, set()).update(x for x in cs if x != a)
    for a, b in world.spouse.items():
        out.add((name(a), "husband" if male(a) else "wife", name(b)))
    for p, cs in children.items():
        for c in cs:
            out.add((name(p), "father" if male(p) else "mother", name(c)))
            out.add((name(c), "son" if male(c) else "daughter", name(p)))
    for a, sibs in siblings.items():
        for b in sibs:
            out.add((name(a), "brother" if male(a) else "sister", name(b)))
    for c, ps in world.parents.items():
        if not ps:
            continue
        uncles = set()
        for p in ps:
            for s in siblings.get(p, ()):
                uncles.add(s)
                if s in world.spouse:
                    uncles.add(world.spouse[s])
        for u in uncles:
            out.add((name(u), "uncle" if male(u) else "aunt", name(c)))
            out.add((name(c), "nephew" if male(c) else "niece", name(u)))
    return sorted(out)


def main():
    out_dir = sys.argv[1]
    families = int(sys.argv[2]) if len(sys.argv) > 2 else 100
    seed = int(sys.argv[3]) if len(sys.argv) > 3 else 11
    rng = random.Random(seed)
    world = World(rng)
    for _ in range(families):
        grow(world, 3)
    rows = triples(world)
    rng.shuffle(rows)
    n_eval = len(rows) // 20
    test, valid, train = rows[:n_eval], rows[n_eval : 2 * n_eval], rows[2 * n_eval :]
    os.makedirs(out_dir, exist_ok=True)
    for split, data in (("train", train), ("valid", valid), ("test", test)):
        with open(os.path.join(out_dir, split + ".txt"), "w", encoding="utf-8") as fh:
            for s, r, o in data:
                fh.write("%s\t%s\t%s\n" % (s, r, o))
    ents = {s for s, _, _ in rows} | {o for _, _, o in rows}
    print("entities=%d triples=%d train=%d valid=%d test=%d" % (len(ents), len(rows), len(train), len(valid), len(test)))


if __name__ == "__main__":
    main()
