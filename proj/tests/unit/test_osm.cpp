#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "geosafety/error.hpp"
#include "geosafety/osm.hpp"
#include "geosafety/rng.hpp"
#include "geosafety/xml_reader.hpp"

using namespace geosafety;

namespace {

OsmSnapshot parse(const std::string& text) {
  std::istringstream in(text);
  return parse_osm(in);
}

ErrorKind parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::IoError;
}

const char* kFixture = R"(<?xml version="1.0" encoding="UTF-8"?>
<osm version="0.6" generator="hand">
  <!-- three nodes, one bar -->
  <node id="1" lat="-1.3130" lon="36.7900">
    <tag k="amenity" v="bar"/>
    <tag k="name" v="Tom &amp; Jerry's"/>
  </node>
  <node id="2" lat="-1.3140" lon="36.7910"/>
  <node id="3" lat="-1.3150" lon="36.7920"></node>
  <way id="10">
    <nd ref="2"/>
    <nd ref="3"/>
    <tag k="waterway" v="river"/>
    <tag k="name" v="Ngong River"/>
  </way>
  <relation id="99"><member type="way" ref="10" role=""/><tag k="type" v="route"/></relation>
</osm>
)";

}  // namespace

TEST_CASE("XmlReader yields structural events") {
  std::istringstream in("<?xml version='1.0'?><!DOCTYPE x><a x='1' y=\"&lt;&#65;&#x42;\"><![CDATA[<b>]]><b/></a>");
  XmlReader r(in);
  auto ev = r.next();
  CHECK(ev.type == XmlReader::EventType::StartElement);
  CHECK(ev.name == "a");
  CHECK(ev.attribute("x") == "1");
  CHECK(ev.attribute("y") == "<AB");
  CHECK(!ev.attribute("z"));
  CHECK(r.next().name == "b");
  CHECK(r.next().type == XmlReader::EventType::EndElement);
  ev = r.next();
  CHECK(ev.type == XmlReader::EventType::EndElement);
  CHECK(ev.name == "a");
  CHECK(r.next().type == XmlReader::EventType::EndOfDocument);
}

TEST_CASE("XmlReader rejects bad markup") {
  for (const char* text : {"<a><b></a>", "<a", "<a x=1/>", "<a></a><b/>", "<a>", "<a x='1' x='2'/>"}) {
    std::istringstream in(text);
    XmlReader r(in);
    CHECK_THROWS_AS(
        [&] {
          while (r.next().type != XmlReader::EventType::EndOfDocument) {
          }
        }(),
        Error);
  }
}

TEST_CASE("parse_osm: empty document") {
  const auto snap = parse(R"(<osm version="0.6"></osm>)");
  CHECK(snap.nodes().empty());
  CHECK(snap.ways().empty());
}

TEST_CASE("parse_osm: hand-constructed fixture") {
  const auto snap = parse(kFixture);
  REQUIRE(snap.nodes().size() == 3);
  REQUIRE(snap.ways().size() == 1);
  const auto* bar = snap.find_node(1);
  REQUIRE(bar);
  CHECK(bar->tags.at("amenity") == "bar");
  CHECK(bar->tags.at("name") == "Tom & Jerry's");
  CHECK(bar->point.lat() == -1.313);
  CHECK(bar->point.lon() == 36.79);
  const auto& way = snap.ways()[0];
  CHECK(way.id == 10);
  CHECK(way.node_refs == std::vector<OsmId>{2, 3});
  CHECK(way.tags.at("waterway") == "river");
  CHECK(way.tags.at("name") == "Ngong River");
  CHECK(!way.incomplete);
  CHECK(snap.warnings().empty());
}

TEST_CASE("parse_osm: error paths") {
  const std::string full = kFixture;
  CHECK(parse_error(full.substr(0, full.size() / 2)) == ErrorKind::MalformedXml);
  CHECK(parse_error(R"(<osm></osm>)") == ErrorKind::UnsupportedVersion);
  CHECK(parse_error(R"(<osm version="0.5"></osm>)") == ErrorKind::UnsupportedVersion);
  CHECK(parse_error(R"(<gpx version="0.6"></gpx>)") == ErrorKind::MalformedXml);
  CHECK(parse_error(R"(<osm version="0.6"><node id="1" lat="x" lon="0"/></osm>)") ==
        ErrorKind::MalformedXml);
  CHECK(parse_error(R"(<osm version="0.6"><node id="1" lat="95" lon="0"/></osm>)") ==
        ErrorKind::MalformedXml);
  CHECK(parse_error(R"(<osm version="0.6"><way id="1"></way></osm>)") == ErrorKind::MalformedXml);
  CHECK(parse_error(R"(<osm version="0.6"><node id="1" lat="0" lon="0"/><node id="1" lat="0" lon="0"/></osm>)") ==
        ErrorKind::MalformedXml);
}

TEST_CASE("parse_osm: unresolved references are warnings") {
  const auto snap = parse(R"(<osm version="0.6"><node id="1" lat="0" lon="0"/>
    <way id="5"><nd ref="1"/><nd ref="2"/></way></osm>)");
  REQUIRE(snap.ways().size() == 1);
  CHECK(snap.ways()[0].incomplete);
  CHECK(snap.warnings().size() == 1);
}

TEST_CASE("parse_osm: deleted and invisible elements are skipped") {
  const auto snap = parse(R"(<osm version="0.6">
    <node id="1" lat="0" lon="0" visible="false"/>
    <node id="2" lat="0" lon="0" action="delete"/>
    <node id="3" lat="0" lon="0"/></osm>)");
  CHECK(snap.nodes().size() == 1);
}

TEST_CASE("classify_entities: default mapping") {
  const auto res = classify_entities(parse(kFixture), TagMapping::defaults());
  CHECK(res.entities.of(Category::Bar).size() == 1);
  CHECK(res.entities.rivers.size() == 1);
  CHECK(res.entities.rivers[0].size() == 2);
  CHECK(res.issues.empty());
}

TEST_CASE("classify_entities: river name filter") {
  const auto motoine = parse(R"(<osm version="0.6">
    <node id="1" lat="-1.31" lon="36.79"/><node id="2" lat="-1.311" lon="36.791"/>
    <node id="3" lat="-1.312" lon="36.792"/><node id="4" lat="-1.313" lon="36.793"/>
    <way id="7"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/>
      <tag k="waterway" v="river"/><tag k="name" v="MOTOINE river"/></way>
    <way id="8"><nd ref="1"/><nd ref="2"/>
      <tag k="waterway" v="river"/><tag k="name" v="Mathare River"/></way>
    <way id="9"><nd ref="1"/><nd ref="2"/><tag k="waterway" v="river"/></way>
  </osm>)");
  const auto res = classify_entities(motoine, TagMapping::defaults());
  REQUIRE(res.entities.rivers.size() == 1);
  CHECK(res.entities.rivers[0].size() == 4);
}

TEST_CASE("classify_entities: unresolvable river way is reported and skipped") {
  const auto snap = parse(R"(<osm version="0.6"><node id="1" lat="0" lon="0"/>
    <way id="5"><nd ref="1"/><nd ref="2"/><tag k="waterway" v="river"/><tag k="name" v="Ngong"/></way></osm>)");
  const auto res = classify_entities(snap, TagMapping::defaults());
  CHECK(res.entities.rivers.empty());
  REQUIRE(res.issues.size() == 1);
  CHECK(res.issues[0].way_id == 5);
  CHECK(res.issues[0].message.rfind("UnresolvableRiverWay", 0) == 0);
}

TEST_CASE("classify_entities: tagged closed way contributes its centroid; multi-category") {
  const auto snap = parse(R"(<osm version="0.6">
    <node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="0.002"/>
    <node id="3" lat="0.002" lon="0.002"/><node id="4" lat="0.002" lon="0"/>
    <way id="20"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/><nd ref="1"/>
      <tag k="amenity" v="place_of_worship"/></way>
    <node id="5" lat="0.01" lon="0.01"><tag k="amenity" v="pub"/><tag k="highway" v="bus_stop"/></node>
  </osm>)");
  const auto res = classify_entities(snap, TagMapping::defaults());
  REQUIRE(res.entities.of(Category::ReligiousBuilding).size() == 1);
  const auto c = res.entities.of(Category::ReligiousBuilding)[0];
  CHECK(c.lat() == doctest::Approx(0.001));
  CHECK(c.lon() == doctest::Approx(0.001));
  CHECK(res.entities.of(Category::Bar).size() == 1);
  CHECK(res.entities.of(Category::BusStop).size() == 1);
}

TEST_CASE("classification is order-insensitive and idempotent") {
  std::vector<std::string> elements;
  Rng rng(9);
  const char* tags[] = {"amenity=bar", "amenity=drinking_water", "highway=street_lamp",
                        "amenity=place_of_worship", "highway=bus_stop", "shop=kiosk"};
  for (int i = 1; i <= 60; ++i) {
    const std::string t = tags[rng.uniform_index(6)];
    const auto eq = t.find('=');
    elements.push_back("<node id=\"" + std::to_string(i) + "\" lat=\"" +
                       std::to_string(-1.31 + 0.0001 * i) + "\" lon=\"36.79\"><tag k=\"" +
                       t.substr(0, eq) + "\" v=\"" + t.substr(eq + 1) + "\"/></node>");
  }
  elements.push_back(R"(<way id="100"><nd ref="1"/><nd ref="2"/><nd ref="3"/><tag k="waterway" v="river"/><tag k="name" v="Ngong"/></way>)");
  const auto doc = [](const std::vector<std::string>& els) {
    std::string s = "<osm version=\"0.6\">";
    for (const auto& e : els) s += e;
    return s + "</osm>";
  };
  const auto sorted_points = [](FeatureEntities e) {
    for (auto& pts : e.points) {
      std::sort(pts.begin(), pts.end(), [](const GeoPoint& a, const GeoPoint& b) {
        return std::pair(a.lat(), a.lon()) < std::pair(b.lat(), b.lon());
      });
    }
    return e;
  };
  const auto mapping = TagMapping::defaults();
  const auto snap = parse(doc(elements));
  const auto base = sorted_points(classify_entities(snap, mapping).entities);
  const auto again = sorted_points(classify_entities(snap, mapping).entities);
  CHECK(base.points == again.points);
  CHECK(base.rivers == again.rivers);
  std::size_t total = 0;
  for (const auto& pts : base.points) total += pts.size();
  CHECK(total <= snap.nodes().size() + snap.ways().size());
  for (int shuffle = 0; shuffle < 5; ++shuffle) {
    auto els = elements;
    for (std::size_t i = els.size() - 1; i > 0; --i) std::swap(els[i], els[rng.uniform_index(i + 1)]);
    const auto other = sorted_points(classify_entities(parse(doc(els)), mapping).entities);
    CHECK(other.points == base.points);
    CHECK(other.rivers == base.rivers);
  }
}

TEST_CASE("TagMapping text form round-trips") {
  const auto d = TagMapping::defaults();
  CHECK(TagMapping::parse(d.to_text()) == d);
  const auto custom = TagMapping::parse(R"(
# custom mapping
[bar]
amenity=bar
shop = alcohol
[religious_building]
building=church
[bus_stop]
highway=bus_stop
[water_source]
amenity=water_point
[street_light]
highway=street_lamp
[river]
waterway=river ; comment line below
name_contains=Nairobi
)");
  CHECK(custom.patterns(Category::Bar).size() == 2);
  CHECK(custom.patterns(Category::Bar)[1] == TagPattern{"shop", "alcohol"});
  CHECK(custom.river_names() == std::vector<std::string>{"Nairobi"});
  CHECK(TagMapping::parse(custom.to_text()) == custom);
}

TEST_CASE("TagMapping rejects invalid configs") {
  CHECK_THROWS_AS(TagMapping::parse("[bar]\namenity=bar\n"), Error);  // categories missing
  CHECK_THROWS_AS(TagMapping::parse("[pub]\namenity=bar\n"), Error);
  CHECK_THROWS_AS(TagMapping::parse("amenity=bar\n"), Error);
  auto text = TagMapping::defaults().to_text();
  CHECK_THROWS_AS(TagMapping::parse(text + "[bar]\nname_contains=x\n"), Error);
  try {
    TagMapping::parse("[bar]\nnonsense\n");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
  }
}

TEST_CASE("write_osm output parses back to the same entities") {
  FeatureEntities e;
  e.of(Category::Bar) = {GeoPoint(-1.31, 36.79), GeoPoint(-1.311, 36.791)};
  e.of(Category::StreetLight) = {GeoPoint(-1.312, 36.792)};
  e.rivers.emplace_back(std::vector<GeoPoint>{GeoPoint(-1.30, 36.78), GeoPoint(-1.32, 36.80)});
  std::ostringstream out;
  write_osm(out, e, TagMapping::defaults());
  const auto back = classify_entities(parse(out.str()), TagMapping::defaults()).entities;
  CHECK(back.points == e.points);
  CHECK(back.rivers == e.rivers);
}
