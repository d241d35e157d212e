"""Regenerates the small knowledge graph fixture in this directory.

Deterministic: running it twice gives identical files.
"""
import json
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))
rng = random.Random(20240917)

PERSONS = ["Alice", "Bruno", "Chen", "Dara", "Elif", "Farid",
           "Greta", "Hugo", "Ines", "Jonas", "Kemal", "Leila"]
COUNTRIES = ["America", "England", "France", "Germany", "Japan", "Italy"]
CITIES = ["Boston", "Leeds", "Lyon", "Munich", "Osaka", "Milan"]
LANGUAGES = ["English", "Spanish", "French", "German", "Japanese", "Italian"]
COUNTRY_LANGUAGES = {
    "America": ["English", "Spanish"], "England": ["English"], "France": ["French"],
    "Germany": ["German"], "Japan": ["Japanese"], "Italy": ["Italian"],
}

def ident(prefix, name):
    return f"/m/{prefix}_{name.lower()}"

person = {p: ident("p", p) for p in PERSONS}
country = {c: ident("c", c) for c in COUNTRIES}
city = {c: ident("t", c) for c in CITIES}
language = {l: ident("l", l) for l in LANGUAGES}

LIVES = "/people/person/lives_in"
LANG = "/location/country/language"
SPEAKS = "/people/person/speaks"
BORN = "/people/person/place_of_birth"
CITY_IN = "/location/city/country"
NAT = "/people/person/nationality"
FRIEND = "/people/person/friend"

facts = []
for ci, c in zip(CITIES, COUNTRIES):
    facts.append((city[ci], CITY_IN, country[c]))
for c, langs in COUNTRY_LANGUAGES.items():
    for l in langs:
        facts.append((country[c], LANG, language[l]))
for p in PERSONS:
    born = rng.randrange(len(CITIES))
    facts.append((person[p], BORN, city[CITIES[born]]))
    nat = born if rng.random() < 0.85 else rng.randrange(len(COUNTRIES))
    facts.append((person[p], NAT, country[COUNTRIES[nat]]))
    lives = nat if rng.random() < 0.7 else rng.randrange(len(COUNTRIES))
    facts.append((person[p], LIVES, country[COUNTRIES[lives]]))
    spoken = set(COUNTRY_LANGUAGES[COUNTRIES[lives]])
    if rng.random() < 0.3:
        spoken.add(rng.choice(LANGUAGES))
    for l in sorted(spoken):
        facts.append((person[p], SPEAKS, language[l]))
pairs = set()
while len(pairs) < 16:
    a, b = rng.sample(PERSONS, 2)
    pairs.add((a, b))
for a, b in sorted(pairs):
    facts.append((person[a], FRIEND, person[b]))

facts = sorted(set(facts))
rng.shuffle(facts)
# people facts only in the held-out splits; city and language facts stay in train
held = [f for f in facts if f[1] in (NAT, SPEAKS, LIVES, BORN)]
test = held[:12]
valid = held[12:24]
train = [f for f in facts if f not in test and f not in valid]

def mentioned(triples):
    return {e for h, _, t in triples for e in (h, t)}

everything = set(person.values()) | set(country.values()) | set(city.values()) | set(language.values())
assert mentioned(train) == everything, everything - mentioned(train)

def write_triples(name, triples):
    with open(os.path.join(HERE, name), "w") as f:
        for h, r, t in triples:
            f.write(f"{h}\t{r}\t{t}\n")

write_triples("train.tsv", train)
write_triples("valid.tsv", valid)
write_triples("test.tsv", test)

RULES = [
    (120, 102, f"{SPEAKS}(X,Y) <= {LANG}(A,Y), {LIVES}(X,A)"),
    (100, 90, f"{NAT}(X,Y) <= {BORN}(X,A), {CITY_IN}(A,Y)"),
    (50, 30, f"{NAT}(X,Y) <= {LIVES}(X,Y)"),
    (50, 35, f"{LIVES}(X,Y) <= {NAT}(X,Y)"),
    (60, 24, f"{SPEAKS}(X,Y) <= {FRIEND}(A,X), {SPEAKS}(A,Y)"),
    # entity-bearing rules: nationality read off a single spoken language
    (40, 30, f"{NAT}(X,{country['America']}) <= {SPEAKS}(X,{language['English']})"),
    (30, 12, f"{NAT}(X,{country['America']}) <= {SPEAKS}(X,{language['Spanish']})"),
]
with open(os.path.join(HERE, "rules.tsv"), "w") as f:
    for predicted, correct, body in RULES:
        f.write(f"{predicted}\t{correct}\t{correct / predicted!r}\t{body}\n")

# NLI verdicts for the two speaks rules: the friend rule is contradicted
with open(os.path.join(HERE, "nli.tsv"), "w") as f:
    f.write("0\t0.8\t0.15\t0.05\n")
    f.write("4\t0.05\t0.15\t0.8\n")

with open(os.path.join(HERE, "labels.tsv"), "w") as f:
    for group in (person, country, city, language):
        for name, eid in group.items():
            f.write(f"{eid}\t{name}\n")

# entity and relation ids as the loader interns them: train order, head before tail
entity_ids, relation_names = {}, []
for h, r, t in train:
    entity_ids.setdefault(h, len(entity_ids))
    if r not in relation_names:
        relation_names.append(r)
    entity_ids.setdefault(t, len(entity_ids))
relation_ids = {r: 2 * i for i, r in enumerate(relation_names)}

def queries(triples):
    keys = {}
    for h, r, t in triples:
        rid = relation_ids[r]
        keys.setdefault((entity_ids[h], rid), set()).add(entity_ids[t])
        keys.setdefault((entity_ids[t], rid + 1), set()).add(entity_ids[h])
    return keys

def write_neural(name, triples):
    with open(os.path.join(HERE, name), "w") as f:
        for (bound, rid), golds in sorted(queries(triples).items()):
            cands = []
            for e in range(len(entity_ids)):
                s = rng.random() * 0.6
                if e in golds and rng.random() < 0.5:
                    s += 0.4
                cands.append([e, round(s, 4)])
            f.write(json.dumps({"h": bound, "r": rid, "candidates": cands}) + "\n")

write_neural("neural_valid.jsonl", valid)
write_neural("neural_test.jsonl", test)
