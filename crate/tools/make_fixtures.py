#!/usr/bin/env python3
"""Regenerates the OSM and word-vector test fixtures.

Writes into crates/cartoprompt/tests/fixtures/:
  golden_fatih.osm / golden_fatih.json   the golden area, XML and Overpass JSON
  count50.osm                            50 elements of mixed kinds
  mini_vectors.txt                       small deterministic word-vector table
  overpass_recorded.json                 canned Overpass reply for the fetch test

Standard library only. Run from the repository root.
"""

import json
import math
import random
from pathlib import Path

R = 6371008.8
LAT0, LON0 = 41.0100, 28.9600
OUT = Path("crates/cartoprompt/tests/fixtures")


def to_ll(x, y):
    lat = LAT0 + math.degrees(y / R)
    lon = LON0 + math.degrees(x / (R * math.cos(math.radians(LAT0))))
    return round(lat, 7), round(lon, 7)


class Doc:
    def __init__(self):
        self.nodes = []
        self.ways = []
        self.rels = []
        self.next_node = 1
        self.next_way = 1000
        self.next_rel = 5000

    def node(self, x, y, tags=None):
        nid = self.next_node
        self.next_node += 1
        lat, lon = to_ll(x, y)
        self.nodes.append((nid, lat, lon, tags or {}))
        return nid

    def way(self, refs, tags=None):
        wid = self.next_way
        self.next_way += 1
        self.ways.append((wid, list(refs), tags or {}))
        return wid

    def ring(self, pts, tags=None):
        refs = [self.node(x, y) for x, y in pts]
        return self.way(refs + [refs[0]], tags)

    def rect(self, cx, cy, w, h, tags=None):
        hw, hh = w / 2, h / 2
        return self.ring([(cx - hw, cy - hh), (cx + hw, cy - hh), (cx + hw, cy + hh), (cx - hw, cy + hh)], tags)

    def line(self, pts, tags):
        return self.way([self.node(x, y) for x, y in pts], tags)

    def relation(self, members, tags):
        rid = self.next_rel
        self.next_rel += 1
        self.rels.append((rid, members, tags))
        return rid

    def xml(self):
        esc = lambda s: (s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;"))
        out = ['<?xml version="1.0" encoding="UTF-8"?>', '<osm version="0.6" generator="make_fixtures.py">']
        lat_lo = min(n[1] for n in self.nodes)
        lat_hi = max(n[1] for n in self.nodes)
        lon_lo = min(n[2] for n in self.nodes)
        lon_hi = max(n[2] for n in self.nodes)
        out.append(f' <bounds minlat="{lat_lo:.7f}" minlon="{lon_lo:.7f}" maxlat="{lat_hi:.7f}" maxlon="{lon_hi:.7f}"/>')
        for nid, lat, lon, tags in self.nodes:
            if tags:
                out.append(f' <node id="{nid}" visible="true" version="1" lat="{lat:.7f}" lon="{lon:.7f}">')
                out += [f'  <tag k="{esc(k)}" v="{esc(v)}"/>' for k, v in tags.items()]
                out.append(" </node>")
            else:
                out.append(f' <node id="{nid}" visible="true" version="1" lat="{lat:.7f}" lon="{lon:.7f}"/>')
        for wid, refs, tags in self.ways:
            out.append(f' <way id="{wid}" visible="true" version="1">')
            out += [f'  <nd ref="{r}"/>' for r in refs]
            out += [f'  <tag k="{esc(k)}" v="{esc(v)}"/>' for k, v in tags.items()]
            out.append(" </way>")
        for rid, members, tags in self.rels:
            out.append(f' <relation id="{rid}" visible="true" version="1">')
            out += [f'  <member type="{t}" ref="{r}" role="{role}"/>' for t, r, role in members]
            out += [f'  <tag k="{esc(k)}" v="{esc(v)}"/>' for k, v in tags.items()]
            out.append(" </relation>")
        out.append("</osm>")
        return "\n".join(out) + "\n"

    def overpass(self):
        els = []
        for nid, lat, lon, tags in self.nodes:
            e = {"type": "node", "id": nid, "lat": float(f"{lat:.7f}"), "lon": float(f"{lon:.7f}")}
            if tags:
                e["tags"] = tags
            els.append(e)
        for wid, refs, tags in self.ways:
            e = {"type": "way", "id": wid, "nodes": refs}
            if tags:
                e["tags"] = tags
            els.append(e)
        for rid, members, tags in self.rels:
            els.append({
                "type": "relation",
                "id": rid,
                "members": [{"type": t, "ref": r, "role": role} for t, r, role in members],
                "tags": tags,
            })
        doc = {"version": 0.6, "generator": "make_fixtures.py", "osm3s": {"copyright": "fixture"}, "elements": els}
        return json.dumps(doc, ensure_ascii=False, indent=1) + "\n"


AMENITIES = {
    "atm": 3, "bank": 2, "bureau_de_change": 1, "cafe": 18, "clinic": 2, "court_house": 1,
    "dentist": 2, "driving_school": 1, "events_venue": 2, "fast_food": 11, "guest_house": 1,
    "hospital": 3, "parking": 11, "pharmacy": 33, "place_of_worship": 9, "post_office": 1,
    "restaurant": 43, "school": 5, "shower": 1,
}

# Polygon-mapped amenities, taken out of the node budget above.
AMENITY_POLYGONS = [("hospital", -60.0, 120.0, 40.0, 40.0), ("parking", 150.0, -60.0, 30.0, 20.0),
                    ("parking", -200.0, 40.0, 25.0, 25.0)]

# Straight interior pieces per tag; each piece gets its own horizontal lane.
ROADS = {
    ("highway", "footway"): [100.0],
    ("highway", "pedestrian"): [80.0],
    ("highway", "primary_link"): [44.0],
    ("highway", "residential"): [400.0, 400.0, 400.0, 400.0, 400.0, 400.0, 386.0],
    ("highway", "steps"): [20.0],
    ("highway", "tertiary"): [300.0, 300.0],
    ("highway", "tertiary_link"): [62.0],
    ("highway", "unclassified"): [249.0],
    ("railway", "platform"): [289.0],
}


def golden():
    rng = random.Random(20231016)
    d = Doc()

    # 525 buildings on a 20 m lattice, nearest lattice points first.
    lattice = [(20.0 * i + 10.0, 20.0 * j + 10.0) for i in range(-15, 15) for j in range(-15, 15)]
    lattice.sort(key=lambda p: (math.hypot(*p), p))
    side = 12.9
    for k, (x, y) in enumerate(lattice[:525]):
        if k == 7:
            # One building mapped as a multipolygon with a courtyard.
            outer = d.rect(x, y, side, side)
            inner = d.rect(x, y, 3.0, 3.0)
            d.relation([("way", outer, "outer"), ("way", inner, "inner")],
                       {"type": "multipolygon", "building": "yes"})
        else:
            d.rect(x, y, side, side, {"building": "yes"})
    # Straddling the edge: adds a little coverage, not counted.
    d.rect(0.0, -302.0, 10.0, 10.0, {"building": "yes"})
    # Well outside.
    for x, y in [(420.0, 0.0), (0.0, 450.0), (-380.0, -300.0)]:
        d.rect(x, y, 14.0, 14.0, {"building": "yes"})
    d.rect(60.0, 60.0, 8.0, 8.0, {"building": "no", "amenity": "shower"})

    # Amenity nodes: uniform in a 285 m disc.
    node_budget = dict(AMENITIES)
    node_budget["shower"] -= 1
    for value, *_ in AMENITY_POLYGONS:
        node_budget[value] -= 1
    for value, count in sorted(node_budget.items()):
        for i in range(count):
            rho = 285.0 * math.sqrt(rng.random())
            th = rng.uniform(0.0, 2.0 * math.pi)
            tags = {"amenity": value}
            if i == 0:
                tags["name"] = f"{value.replace('_', ' ').title()} Fatih"
            d.node(rho * math.cos(th), rho * math.sin(th), tags)
    for value, x, y, w, h in AMENITY_POLYGONS:
        d.rect(x, y, w, h, {"amenity": value})
    # Just outside the circle.
    d.node(301.0, 0.0, {"amenity": "cafe"})
    d.node(0.0, -305.0, {"amenity": "pharmacy"})
    d.node(-250.0, 250.0, {"amenity": "bar"})
    for i in range(6):
        th = 2.0 * math.pi * i / 6
        d.node(500.0 * math.cos(th), 500.0 * math.sin(th), {"amenity": "restaurant"})
    d.node(10.0, 10.0, {"shop": "bakery"})

    # Roads and rails.
    lanes = iter([-171.0 + 18.0 * i for i in range(20)])
    for (key, value), pieces in ROADS.items():
        for length in pieces:
            y = next(lanes)
            d.line([(-length / 2.0, y), (length / 2.0, y)], {key: value})
    # Service as an L-shape: 150 + 133.
    d.line([(-200.0, -220.0), (-50.0, -220.0), (-50.0, -87.0)], {"highway": "service"})
    # Tertiary crossing the boundary: the chord inside is 405 m.
    y_chord = math.sqrt(300.0 ** 2 - 202.5 ** 2)
    d.line([(-420.0, y_chord), (0.0, y_chord), (420.0, y_chord)], {"highway": "tertiary"})
    # Pedestrian square mapped as an area is not a line.
    d.rect(100.0, 100.0, 30.0, 30.0, {"highway": "pedestrian", "area": "yes"})
    # Entirely outside.
    d.line([(-600.0, 420.0), (600.0, 420.0)], {"highway": "primary"})
    d.line([(350.0, -600.0), (350.0, 600.0)], {"railway": "tram"})
    # References a node that is not in the file.
    wid = d.next_way
    d.next_way += 1
    a = d.node(-30.0, 5.0)
    d.ways.append((wid, [a, 999999], {"highway": "trunk"}))

    # Land cover: grass is under the 2% gate, residential is excluded.
    d.rect(-150.0, -150.0, 55.0, 72.0, {"landuse": "grass"})
    d.rect(0.0, 0.0, 400.0, 300.0, {"landuse": "residential"})
    d.rect(600.0, 0.0, 100.0, 100.0, {"leisure": "park"})
    d.rect(0.0, 285.0, 60.0, 30.0, {"landuse": "construction"})

    # Province from two ways, district from three, neighbour sharing an edge.
    p = [d.node(-3000.0, -3000.0), d.node(3000.0, -3000.0), d.node(3000.0, 3000.0), d.node(-3000.0, 3000.0)]
    pw1 = d.way([p[0], p[1], p[2]])
    pw2 = d.way([p[2], p[3], p[0]])
    d.relation([("way", pw1, "outer"), ("way", pw2, "outer")],
               {"type": "boundary", "boundary": "administrative", "admin_level": "4", "name": "İstanbul"})
    f = [d.node(-1500.0, -1500.0), d.node(1500.0, -1500.0), d.node(1500.0, 1500.0), d.node(-1500.0, 1500.0)]
    fw1 = d.way([f[0], f[1]])
    fw2 = d.way([f[1], f[2]])
    fw3 = d.way([f[0], f[3], f[2]])
    d.relation([("way", fw1, "outer"), ("way", fw2, "outer"), ("way", fw3, "outer")],
               {"type": "boundary", "boundary": "administrative", "admin_level": "6", "name": "Fatih"})
    b = [d.node(2800.0, -1500.0), d.node(2800.0, 1500.0)]
    bw1 = d.way([f[1], b[0], b[1], f[2]])
    d.relation([("way", bw1, "outer"), ("way", fw2, "outer")],
               {"type": "boundary", "boundary": "administrative", "admin_level": "6", "name": "Beyoğlu"})
    m = d.ring([(-400.0, -400.0), (400.0, -400.0), (400.0, 400.0), (-400.0, 400.0)])
    d.relation([("way", m, "outer")],
               {"type": "boundary", "boundary": "administrative", "admin_level": "8", "name": "Alemdar"})
    u = d.ring([(-300.0, -300.0), (-200.0, -300.0), (-200.0, -200.0), (-300.0, -200.0)])
    d.relation([("way", u, "outer")], {"type": "boundary", "boundary": "administrative", "admin_level": "6"})
    return d


def count50():
    rng = random.Random(50)
    d = Doc()
    refs = []
    for i in range(30):
        tags = {"amenity": rng.choice(["cafe", "atm", "bank"])} if i % 3 == 0 else None
        refs.append(d.node(rng.uniform(-200, 200), rng.uniform(-200, 200), tags))
    for i in range(15):
        a, b = rng.sample(refs, 2)
        d.way([a, b], {"highway": "service"})
    for i in range(5):
        d.relation([("way", 1000 + i, "outer"), ("node", refs[i], "label")], {"type": "route", "route": "bus"})
    assert len(d.nodes) + len(d.ways) + len(d.rels) == 50
    return d.xml()


VOCAB = """this is a circular area of radius 300 meters that intersects province s and district
istanbul fatih there are atm bank bureau de change cafe clinic court house dentist driving school
events venue fast food guest hospital parking pharmacy place worship post office restaurant shower
buildings which cover the total it contains rail road platform footway pedestrian primary link
residential service steps tertiary unclassified 1 2 3 5 9 11 18 33 43 525 31 289 100 80 44 2786 283
20 1005 62 249""".split()


def vectors():
    rng = random.Random(8)
    lines = [f"{w} " + " ".join(f"{rng.uniform(-1, 1):.6f}" for _ in range(8)) for w in dict.fromkeys(VOCAB)]
    return "\n".join(lines) + "\n"


def recorded():
    d = Doc()
    a = d.node(0.0, 0.0, {"amenity": "cafe", "name": "Köşe"})
    b = d.node(30.0, 0.0)
    d.way([a, b], {"highway": "footway"})
    return d.overpass()


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    g = golden()
    (OUT / "golden_fatih.osm").write_text(g.xml(), encoding="utf-8")
    (OUT / "golden_fatih.json").write_text(g.overpass(), encoding="utf-8")
    (OUT / "count50.osm").write_text(count50(), encoding="utf-8")
    (OUT / "mini_vectors.txt").write_text(vectors(), encoding="utf-8")
    (OUT / "overpass_recorded.json").write_text(recorded(), encoding="utf-8")
    print(f"golden: {len(g.nodes)} nodes, {len(g.ways)} ways, {len(g.rels)} relations")
