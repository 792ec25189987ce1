#include "geosafety/osm.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "geosafety/error.hpp"
#include "geosafety/xml_reader.hpp"

namespace geosafety {

namespace {

template <typename T>
T parse_number(std::string_view text, std::string_view what, const XmlReader& reader) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorKind::MalformedXml, "invalid " + std::string(what) + " '" + std::string(text) +
                                             "' (line " + std::to_string(reader.line()) + ")");
  }
  return value;
}

std::string_view required(const XmlReader::Event& ev, std::string_view key,
                          const XmlReader& reader) {
  auto v = ev.attribute(key);
  if (!v) {
    throw Error(ErrorKind::MalformedXml, "<" + ev.name + "> missing '" + std::string(key) +
                                             "' attribute (line " +
                                             std::to_string(reader.line()) + ")");
  }
  return *v;
}

void read_tag(const XmlReader::Event& ev, TagMap& tags, const XmlReader& reader) {
  tags.insert_or_assign(std::string(required(ev, "k", reader)),
                        std::string(required(ev, "v", reader)));
}

bool hidden(const XmlReader::Event& ev) {
  auto visible = ev.attribute("visible");
  auto action = ev.attribute("action");
  return (visible && *visible == "false") || (action && *action == "delete");
}

}  // namespace

const OsmNode* OsmSnapshot::find_node(OsmId id) const {
  auto it = node_index_.find(id);
  return it == node_index_.end() ? nullptr : &nodes_[it->second];
}

void OsmSnapshot::add_node(OsmNode node) {
  const auto [it, inserted] = node_index_.emplace(node.id, nodes_.size());
  if (!inserted) {
    throw Error(ErrorKind::MalformedXml, "duplicate node id " + std::to_string(node.id));
  }
  nodes_.push_back(std::move(node));
}

void OsmSnapshot::add_way(OsmWay way) { ways_.push_back(std::move(way)); }

void OsmSnapshot::resolve_references() {
  for (auto& way : ways_) {
    std::size_t missing = 0;
    for (OsmId ref : way.node_refs) {
      if (!node_index_.contains(ref)) ++missing;
    }
    way.incomplete = missing > 0;
    if (missing > 0) {
      warnings_.push_back("way " + std::to_string(way.id) + ": " + std::to_string(missing) +
                          " of " + std::to_string(way.node_refs.size()) +
                          " node references unresolved");
    }
  }
}

OsmSnapshot parse_osm(std::istream& in) {
  XmlReader reader(in);
  OsmSnapshot snapshot;

  const auto& root = reader.next();
  if (root.type != XmlReader::EventType::StartElement || root.name != "osm") {
    throw Error(ErrorKind::MalformedXml, "document root is not <osm>");
  }
  const auto version = root.attribute("version");
  if (!version) throw Error(ErrorKind::UnsupportedVersion, "missing osm version attribute");
  if (*version != "0.6") {
    throw Error(ErrorKind::UnsupportedVersion, "osm version '" + std::string(*version) + "'");
  }

  enum class Context { None, Node, Way, Skip };
  Context context = Context::None;
  bool skip_current = false;
  OsmNode node;
  OsmWay way;

  while (true) {
    const auto& ev = reader.next();
    if (ev.type == XmlReader::EventType::EndOfDocument) break;

    if (ev.type == XmlReader::EventType::StartElement) {
      if (reader.depth() == 2) {
        skip_current = hidden(ev);
        if (ev.name == "node") {
          context = Context::Node;
          node = OsmNode{};
          node.id = parse_number<OsmId>(required(ev, "id", reader), "node id", reader);
          if (!skip_current) {
            const double lat = parse_number<double>(required(ev, "lat", reader), "lat", reader);
            const double lon = parse_number<double>(required(ev, "lon", reader), "lon", reader);
            try {
              node.point = GeoPoint(lat, lon);
            } catch (const Error& e) {
              throw Error(ErrorKind::MalformedXml, "node " + std::to_string(node.id) + ": " +
                                                       e.what());
            }
          }
        } else if (ev.name == "way") {
          context = Context::Way;
          way = OsmWay{};
          way.id = parse_number<OsmId>(required(ev, "id", reader), "way id", reader);
        } else {
          context = Context::Skip;  // relations, bounds, changesets
        }
      } else if (reader.depth() == 3 && context != Context::Skip) {
        if (ev.name == "tag") {
          read_tag(ev, context == Context::Node ? node.tags : way.tags, reader);
        } else if (ev.name == "nd" && context == Context::Way) {
          way.node_refs.push_back(
              parse_number<OsmId>(required(ev, "ref", reader), "node ref", reader));
        }
      }
    } else if (reader.depth() == 1) {
      // End of a top-level child.
      if (!skip_current) {
        if (context == Context::Node) {
          snapshot.add_node(std::move(node));
        } else if (context == Context::Way) {
          if (way.node_refs.empty()) {
            throw Error(ErrorKind::MalformedXml,
                        "way " + std::to_string(way.id) + " has no node references");
          }
          snapshot.add_way(std::move(way));
        }
      }
      context = Context::None;
      skip_current = false;
    }
  }

  snapshot.resolve_references();
  return snapshot;
}

OsmSnapshot parse_osm_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open OSM file " + path.string());
  return parse_osm(in);
}

ClassifyResult classify_entities(const OsmSnapshot& snapshot, const TagMapping& mapping) {
  mapping.validate();
  ClassifyResult result;
  auto& entities = result.entities;

  for (const auto& node : snapshot.nodes()) {
    if (node.tags.empty()) continue;
    for (Category c : kPointCategories) {
      if (mapping.matches(c, node.tags)) entities.of(c).push_back(node.point);
    }
  }

  for (const auto& way : snapshot.ways()) {
    if (way.tags.empty()) continue;
    std::vector<GeoPoint> vertices;
    vertices.reserve(way.node_refs.size());
    for (OsmId ref : way.node_refs) {
      if (const auto* n = snapshot.find_node(ref)) vertices.push_back(n->point);
    }

    if (mapping.matches(Category::River, way.tags) && mapping.river_name_matches(way.tags)) {
      if (vertices.size() < 2) {
        result.issues.push_back(
            {way.id, "UnresolvableRiverWay: way " + std::to_string(way.id) + " has " +
                         std::to_string(vertices.size()) + " resolvable nodes"});
      } else {
        entities.rivers.emplace_back(vertices);
      }
    }

    if (vertices.empty()) continue;
    std::size_t count = vertices.size();
    const bool closed = way.node_refs.size() > 1 && way.node_refs.front() == way.node_refs.back();
    if (closed && count > 1 && vertices.front() == vertices.back()) --count;
    bool centroid_ready = false;
    GeoPoint centroid;
    for (Category c : kPointCategories) {
      if (!mapping.matches(c, way.tags)) continue;
      if (!centroid_ready) {
        double lat = 0.0;
        double lon = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
          lat += vertices[i].lat();
          lon += vertices[i].lon();
        }
        centroid = GeoPoint(lat / static_cast<double>(count), lon / static_cast<double>(count));
        centroid_ready = true;
      }
      entities.of(c).push_back(centroid);
    }
  }
  return result;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

void write_osm(std::ostream& out, const FeatureEntities& entities, const TagMapping& mapping) {
  mapping.validate();
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<osm version=\"0.6\" generator=\"geosafety\">\n";
  OsmId next_id = 1;
  const auto coord = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(7) << v;
    return s.str();
  };
  for (Category c : kPointCategories) {
    const auto& pattern = mapping.patterns(c).front();
    for (const auto& p : entities.of(c)) {
      out << "  <node id=\"" << next_id++ << "\" lat=\"" << coord(p.lat()) << "\" lon=\""
          << coord(p.lon()) << "\">\n";
      out << "    <tag k=\"" << xml_escape(pattern.key) << "\" v=\"" << xml_escape(pattern.value)
          << "\"/>\n";
      out << "  </node>\n";
    }
  }
  std::vector<std::vector<OsmId>> river_refs;
  for (const auto& river : entities.rivers) {
    auto& refs = river_refs.emplace_back();
    for (const auto& p : river.vertices()) {
      refs.push_back(next_id);
      out << "  <node id=\"" << next_id++ << "\" lat=\"" << coord(p.lat()) << "\" lon=\""
          << coord(p.lon()) << "\"/>\n";
    }
  }
  const auto& river_pattern = mapping.patterns(Category::River).front();
  for (const auto& refs : river_refs) {
    out << "  <way id=\"" << next_id++ << "\">\n";
    for (OsmId r : refs) out << "    <nd ref=\"" << r << "\"/>\n";
    out << "    <tag k=\"" << xml_escape(river_pattern.key) << "\" v=\""
        << xml_escape(river_pattern.value) << "\"/>\n";
    out << "    <tag k=\"name\" v=\"" << xml_escape(mapping.river_names().front())
        << " River\"/>\n";
    out << "  </way>\n";
  }
  out << "</osm>\n";
}

}  // namespace geosafety
