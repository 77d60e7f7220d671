#!/usr/bin/env python3
"""Build a desk-scale WN18-style subset from the WordNet 3.1 database files.

Usage: make_wn_subset.py <wordnet-dict-dir> <out-dir> [target_entities] [seed]

The dict dir is the `dict/` folder of the `wordnet-db` npm package.
Relations follow the WN18 naming (18 synset-level pointer types).
"""
import os
import random
import sys
from collections import defaultdict, deque

POINTERS = {
    "@": "_hypernym",
    "~": "_hyponym",
    "@i": "_instance_hypernym",
    "~i": "_instance_hyponym",
    "#m": "_member_holonym",
    "%m": "_member_meronym",
    "#p": "_part_of",
    "%p": "_has_part",
    "+": "_derivationally_related_form",
    ";c": "_synset_domain_topic_of",
    "-c": "_member_of_domain_topic",
    ";r": "_synset_domain_region_of",
    "-r": "_member_of_domain_region",
    ";u": "_synset_domain_usage_of",
    "-u": "_member_of_domain_usage",
    "^": "_also_see",
    "$": "_verb_group",
    "&": "_similar_to",
}


def parse(dict_dir):
    names = {}
    edges = set()
    for pos in ("noun", "verb"):
        with open(os.path.join(dict_dir, "data." + pos), encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("  "):
                    continue
                head = line.split("|")[0].split()
                offset, ss_type = head[0], head[2]
                key = offset + ss_type[0]
                w_cnt = int(head[3], 16)
                words = head[4 : 4 + 2 * w_cnt : 2]
                names[key] = "%s.%s.%s" % (words[0].lower(), ss_type[0], offset)
                p = 4 + 2 * w_cnt
                p_cnt = int(head[p])
                p += 1
                for _ in range(p_cnt):
                    sym, tgt, tpos = head[p], head[p + 1], head[p + 2]
                    p += 4
                    rel = POINTERS.get(sym)
                    if rel is None or tpos not in ("n", "v"):
                        continue
                    edges.add((key, rel, tgt + tpos))
    edges = {(s, r, o) for (s, r, o) in edges if s in names and o in names and s != o}
    return names, edges


def main():
    dict_dir, out_dir = sys.argv[1], sys.argv[2]
    target = int(sys.argv[3]) if len(sys.argv) > 3 else 4000
    seed = int(sys.argv[4]) if len(sys.argv) > 4 else 17
    rng = random.Random(seed)
    names, edges = parse(dict_dir)
    adj = defaultdict(set)
    for s, _, o in edges:
        adj[s].add(o)
        adj[o].add(s)
    # Seeds are well-connected synsets, grown by BFS so the subset stays connected.
    candidates = sorted(k for k in adj if len(adj[k]) >= 8)
    rng.shuffle(candidates)
    chosen = set()
    for start in candidates:
        if len(chosen) >= target:
            break
        if start in chosen:
            continue
        queue = deque([start])
        budget = 60
        while queue and budget > 0 and len(chosen) < target:
            node = queue.popleft()
            if node in chosen:
                continue
            chosen.add(node)
            budget -= 1
            nbrs = sorted(adj[node])
            rng.shuffle(nbrs)
            queue.extend(nbrs[:6])
    sub = sorted((names[s], r, names[o]) for s, r, o in edges if s in chosen and o in chosen)
    rng.shuffle(sub)
    n_eval = max(1, len(sub) // 20)
    test, valid, train = sub[:n_eval], sub[n_eval : 2 * n_eval], sub[2 * n_eval :]
    os.makedirs(out_dir, exist_ok=True)
    for name, rows in (("train", train), ("valid", valid), ("test", test)):
        with open(os.path.join(out_dir, name + ".txt"), "w", encoding="utf-8") as fh:
            for s, r, o in rows:
                fh.write("%s\t%s\t%s\n" % (s, r, o))
    ents = {s for s, _, _ in sub} | {o for _, _, o in sub}
    rels = {r for _, r, _ in sub}
    print("entities=%d relations=%d train=%d valid=%d test=%d" % (len(ents), len(rels), len(train), len(valid), len(test)))


if __name__ == "__main__":
    main()
