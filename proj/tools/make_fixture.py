#!/usr/bin/env python3
"""Generate the bundled synthetic fixture in data/fixture/.

The fixture is a small Kibera-like settlement: an OpenStreetMap snapshot with
bars, religious buildings, bus stops, water sources, street lights and three
named rivers (two counted, one decoy), seven survey locations, 35 participants
answering three questions at every location, and 23 schools.

features_expected.csv is computed here by brute force (haversine distances to
every entity, exhaustive point-to-segment distances for rivers). It is an
independent oracle for the C++ feature extractor: entities are rejected when
they fall within MARGIN_M of any radius boundary, so the two implementations
cannot disagree because of sub-metre numerical differences.

The script is deterministic (Python's Mersenne Twister with a fixed seed).
Re-running it reproduces the committed files byte for byte.
"""

import math
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "fixture"
SEED = 20190607
R_EARTH = 6371000.0
CENTER = (-1.3130, 36.7900)
MARGIN_M = 3.0

RADII = {"street_light": 150.0, "bar": 400.0, "bus_stop": 400.0,
         "water_source": 400.0, "religious_building": 400.0}
RIVER_RADIUS = 50.0
# Tag written for each category (alternates exercise the mapping).
TAGS = {
    "bar": [("amenity", "bar"), ("amenity", "pub")],
    "religious_building": [("amenity", "place_of_worship")],
    "bus_stop": [("highway", "bus_stop"), ("amenity", "bus_station")],
    "water_source": [("amenity", "drinking_water"), ("man_made", "water_point")],
    "street_light": [("highway", "street_lamp")],
}
FEATURE_ORDER = ["street_light", "bar", "bus_stop", "water_source", "religious_building"]
# Planted main-effects coefficients used for the responses and schools.
BETA = {"intercept": 6.0, "male": 0.1, "alone": -2.3, "night": -2.1,
        "lights_150m": 0.3, "bars_400m": -0.4, "bus_stops_400m": -0.2,
        "water_sources_400m": 0.15, "religious_400m": -0.25, "river_within_50m": -1.0}


def to_geo(east, north):
    lat0, lon0 = math.radians(CENTER[0]), math.radians(CENTER[1])
    lat = lat0 + north / R_EARTH
    lon = lon0 + east / (R_EARTH * math.cos(lat0))
    return (round(math.degrees(lat), 7), round(math.degrees(lon), 7))


def haversine(a, b):
    la1, lo1, la2, lo2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    h = math.sin((la2 - la1) / 2) ** 2 + math.cos(la1) * math.cos(la2) * math.sin((lo2 - lo1) / 2) ** 2
    return 2 * R_EARTH * math.asin(min(1.0, math.sqrt(h)))


def segment_distance(p, a, b):
    """Distance from p to segment ab by dense sampling (0.5 m spacing or finer)."""
    best = min(haversine(p, a), haversine(p, b))
    n = 2000
    for i in range(n + 1):
        t = i / n
        q = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
        best = min(best, haversine(p, q))
    return best


def polyline_distance(p, vertices):
    return min(segment_distance(p, vertices[i], vertices[i + 1]) for i in range(len(vertices) - 1))


def near_boundary(point, locations):
    for loc in locations:
        d = haversine(point, loc)
        for r in set(RADII.values()):
            if abs(d - r) < MARGIN_M:
                return True
    return False


def main():
    rng = random.Random(SEED)
    OUT.mkdir(parents=True, exist_ok=True)

    # Seven survey locations along a loose east-west transect.
    loc_offsets = [(-900, 120), (-600, -180), (-300, 60), (0, -90), (300, 150), (600, -60), (900, 90)]
    locations = [to_geo(e, n) for e, n in loc_offsets]
    loc_ids = [f"L{i + 1}" for i in range(len(locations))]

    # Point entities: background scatter plus a bar cluster at L5.
    intensity = {"bar": 2.0, "religious_building": 2.5, "bus_stop": 1.5,
                 "water_source": 2.5, "street_light": 12.0}  # per km^2
    box_e, box_n = 3000.0, 1600.0
    entities = {c: [] for c in FEATURE_ORDER}

    def place(category, east, north):
        point = to_geo(east, north)
        if near_boundary(point, locations):
            return False
        entities[category].append(point)
        return True

    for category in FEATURE_ORDER:
        count = round(intensity[category] * box_e * box_n / 1e6)
        placed = 0
        while placed < count:
            if place(category, rng.uniform(-box_e / 2, box_e / 2), rng.uniform(-box_n / 2, box_n / 2)):
                placed += 1
    # Lights near every location so the 150 m count varies.
    for i, (e, n) in enumerate(loc_offsets):
        placed = 0
        while placed < i % 4 + 1:
            ang, rad = rng.uniform(0, 2 * math.pi), rng.uniform(10, 140)
            if place("street_light", e + rad * math.cos(ang), n + rad * math.sin(ang)):
                placed += 1
    # A dense bar strip around L5.
    placed = 0
    while placed < 7:
        ang, rad = rng.uniform(0, 2 * math.pi), rng.uniform(20, 250)
        if place("bar", 300 + rad * math.cos(ang), 150 + rad * math.sin(ang)):
            placed += 1

    # Rivers: Ngong passes close to L2 and L3, Motoine close to L6, and the
    # Mathare decoy (not a counted river name) is the only river near L7.
    rivers = [
        ("Ngong River", [to_geo(-1500, -400), to_geo(-600, -150), to_geo(-300, 30), to_geo(100, 700)]),
        ("Motoine River", [to_geo(400, -800), to_geo(610, -30), to_geo(1500, -400)]),
        ("Mathare River", [to_geo(800, 800), to_geo(905, 100), to_geo(950, -800)]),
    ]
    stream = [to_geo(-1400, 500), to_geo(-950, 130), to_geo(-700, 700)]  # waterway=stream, ignored

    # Oracle features.
    features = []
    for loc in locations:
        row = []
        for category in FEATURE_ORDER:
            r = RADII[category]
            row.append(sum(1 for p in entities[category] if haversine(loc, p) <= r))
        dist = min(polyline_distance(loc, verts) for name, verts in rivers if name != "Mathare River")
        if abs(dist - RIVER_RADIUS) < MARGIN_M:
            raise SystemExit(f"location {loc} too close to the river threshold ({dist:.2f} m)")
        row.append(1 if dist <= RIVER_RADIUS else 0)
        features.append(row)

    # ---- settlement.osm
    next_id = 1000
    lines = ['<?xml version="1.0" encoding="UTF-8"?>',
             "<!-- synthetic fixture generated by tools/make_fixture.py -->",
             '<osm version="0.6" generator="make_fixture.py">',
             '  <bounds minlat="-1.330" minlon="36.770" maxlat="-1.296" maxlon="36.810"/>']
    for category in FEATURE_ORDER:
        for k, p in enumerate(entities[category]):
            key, value = TAGS[category][k % len(TAGS[category])]
            lines.append(f'  <node id="{next_id}" lat="{p[0]:.7f}" lon="{p[1]:.7f}" version="1">')
            lines.append(f'    <tag k="{key}" v="{value}"/>')
            lines.append("  </node>")
            next_id += 1
    # Unrelated tagged nodes.
    for k in range(6):
        p = to_geo(rng.uniform(-1400, 1400), rng.uniform(-700, 700))
        lines.append(f'  <node id="{next_id}" lat="{p[0]:.7f}" lon="{p[1]:.7f}" version="1">')
        lines.append('    <tag k="shop" v="kiosk"/>')
        lines.append(f'    <tag k="name" v="Duka &amp; Sons {k}"/>')
        lines.append("  </node>")
        next_id += 1
    way_lines = []
    way_id = 1
    for name, verts in rivers + [("Kibera stream", stream)]:
        refs = []
        for p in verts:
            lines.append(f'  <node id="{next_id}" lat="{p[0]:.7f}" lon="{p[1]:.7f}" version="1"/>')
            refs.append(next_id)
            next_id += 1
        waterway = "stream" if name == "Kibera stream" else "river"
        way_lines.append(f'  <way id="{way_id}" version="1">')
        way_lines.extend(f'    <nd ref="{r}"/>' for r in refs)
        way_lines.append(f'    <tag k="waterway" v="{waterway}"/>')
        way_lines.append(f'    <tag k="name" v="{name}"/>')
        way_lines.append("  </way>")
        way_id += 1
    lines.extend(way_lines)
    lines.append("</osm>")
    (OUT / "settlement.osm").write_text("\n".join(lines) + "\n")

    header = "# synthetic fixture generated by tools/make_fixture.py\n"
    (OUT / "locations.csv").write_text(
        header + "location_id,lat,lon\n" + "".join(f"{i},{p[0]:.7f},{p[1]:.7f}\n" for i, p in zip(loc_ids, locations)))

    cols = ["lights_150m", "bars_400m", "bus_stops_400m", "water_sources_400m", "religious_400m", "river_within_50m"]
    (OUT / "features_expected.csv").write_text(
        "# brute-force oracle counts from tools/make_fixture.py\n" + "location_id," + ",".join(cols) + "\n"
        + "".join(f"{i}," + ",".join(map(str, row)) + "\n" for i, row in zip(loc_ids, features)))

    # ---- participants and responses (15 male, 20 female)
    participants = [(f"P{i + 1:02d}", "M" if i < 15 else "F") for i in range(35)]
    (OUT / "participants.csv").write_text(
        header + "participant_id,sex\n" + "".join(f"{pid},{sex}\n" for pid, sex in participants))

    def safety(row, male, alone, night):
        x = [1, male, alone, night] + row
        return sum(b * v for b, v in zip(BETA.values(), x))

    out = [header, "participant_id,location_id,question,score\n"]
    for pid, sex in participants:
        u = rng.gauss(0.0, 1.0)
        for lid, row in zip(loc_ids, features):
            for question, alone, night in (("now", 0, 0), ("alone", 1, 0), ("night", 0, 1)):
                y = safety(row, 1 if sex == "M" else 0, alone, night) + u + rng.gauss(0.0, 1.0)
                score = min(10, max(1, int(math.floor(y + 0.5))))
                out.append(f"{pid},{lid},{question},{score}\n")
    (OUT / "responses.csv").write_text("".join(out))

    # ---- schools: observed rate falls with planted safety
    school_rows = []
    k = 0
    while len(school_rows) < 23:
        e, n = rng.uniform(-1200, 1200), rng.uniform(-600, 600)
        p = to_geo(e, n)
        if any(abs(haversine(p, q) - r) < MARGIN_M
                                       for c in FEATURE_ORDER for q in entities[c] for r in [RADII[c]]):
            continue
        row = [sum(1 for q in entities[c] if haversine(p, q) <= RADII[c]) for c in FEATURE_ORDER]
        dist = min(polyline_distance(p, verts) for name, verts in rivers if name != "Mathare River")
        if abs(dist - RIVER_RADIUS) < MARGIN_M:
            continue
        row.append(1 if dist <= RIVER_RADIUS else 0)
        rate = min(1.0, max(0.0, 0.35 - 0.05 * safety(row, 0, 0, 0) + rng.gauss(0.0, 0.01)))
        k += 1
        school_rows.append((f"S{k:02d}", p, rate, rng.randint(150, 600),
                            min(1.0, max(0.0, 0.05 + 0.5 * rate + rng.gauss(0.0, 0.02))),
                            round(rng.uniform(0.005, 0.05), 4), round(rng.uniform(0.02, 0.04), 4)))
    (OUT / "schools.csv").write_text(
        header + "school_id,lat,lon,observed_rate,enrollment,dropout_rate,toilets_per_student,teachers_per_student\n"
        + "".join(f"{s},{p[0]:.7f},{p[1]:.7f},{rate:.4f},{enr},{drop:.4f},{toil},{teach}\n"
                  for s, p, rate, enr, drop, toil, teach in school_rows))


if __name__ == "__main__":
    main()
