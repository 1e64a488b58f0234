#pragma once

// Series ingestion and emission.
//
// CSV:  header `id,t,y`, one row per observation, rows of a record contiguous.
//       Optional sidecar `id,title,category,age_days,total_views` (empty = absent).
// JSON: [{"id", "title"?, "category"?, "age_days", "total_views"?,
//         "observations": [[t, y], ...]}, ...]
//
// Numbers are written in shortest round-trip form, so write-then-read is bit-exact.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "viewfit/error.hpp"
#include "viewfit/series.hpp"
#include "viewfit/synth.hpp"

namespace viewfit {

inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace csv {

/// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          fields.back() += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string_view trim_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

}  // namespace csv

namespace detail {

inline Error parse_error(const std::string& source, std::size_t line, const std::string& what) {
  return Error(ErrorCode::ParseError, source + ":" + std::to_string(line) + ": " + what);
}

inline double parse_double(std::string_view s, const std::string& source, std::size_t line) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
    throw parse_error(source, line, "invalid number '" + std::string(s) + "'");
  }
  return x;
}

inline std::int64_t parse_int(std::string_view s, const std::string& source, std::size_t line) {
  std::int64_t x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
    throw parse_error(source, line, "invalid integer '" + std::string(s) + "'");
  }
  return x;
}

inline std::int64_t default_age(const SeriesRecord& r) {
  if (r.observations.empty()) return 1;
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(r.observations.back().t)));
}

}  // namespace detail

struct IngestResult {
  std::vector<SeriesRecord> records;
  std::vector<Diagnostic> diagnostics;
};

struct Metadata {
  std::optional<std::string> title;
  std::optional<std::string> category;
  std::optional<std::int64_t> age_days;
  std::optional<std::int64_t> total_views;
};

inline std::map<std::string, Metadata> read_metadata_csv(std::istream& in, const std::string& source = "<meta>") {
  std::map<std::string, Metadata> out;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw detail::parse_error(source, 1, "empty metadata file");
  ++lineno;
  const auto header = csv::split(csv::trim_cr(line));
  if (header != std::vector<std::string>{"id", "title", "category", "age_days", "total_views"}) {
    throw detail::parse_error(source, lineno, "expected header id,title,category,age_days,total_views");
  }
  while (std::getline(in, line)) {
    ++lineno;
    const auto row = csv::trim_cr(line);
    if (row.empty()) continue;
    const auto f = csv::split(row);
    if (f.size() != 5) throw detail::parse_error(source, lineno, "expected 5 fields");
    if (f[0].empty()) throw detail::parse_error(source, lineno, "empty id");
    Metadata m;
    if (!f[1].empty()) m.title = f[1];
    if (!f[2].empty()) m.category = canonical_category(f[2]);
    if (!f[3].empty()) m.age_days = detail::parse_int(f[3], source, lineno);
    if (!f[4].empty()) m.total_views = detail::parse_int(f[4], source, lineno);
    if (!out.emplace(f[0], std::move(m)).second) throw detail::parse_error(source, lineno, "duplicate id " + f[0]);
  }
  return out;
}

/// Splits parsed records into valid ones and per-record rejections, keeping file order.
inline IngestResult validate_records(std::vector<SeriesRecord> parsed) {
  IngestResult out;
  for (auto& r : parsed) {
    if (auto d = check_record(r)) {
      out.diagnostics.push_back(std::move(*d));
    } else {
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

inline IngestResult read_series_csv(std::istream& in, const std::map<std::string, Metadata>* meta = nullptr,
                                    const std::string& source = "<csv>") {
  std::vector<SeriesRecord> parsed;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw detail::parse_error(source, 1, "empty file");
  ++lineno;
  if (csv::split(csv::trim_cr(line)) != std::vector<std::string>{"id", "t", "y"}) {
    throw detail::parse_error(source, lineno, "expected header id,t,y");
  }
  while (std::getline(in, line)) {
    ++lineno;
    const auto row = csv::trim_cr(line);
    if (row.empty()) continue;
    const auto f = csv::split(row);
    if (f.size() != 3) throw detail::parse_error(source, lineno, "expected 3 fields");
    if (f[0].empty()) throw detail::parse_error(source, lineno, "empty id");
    const Observation o{detail::parse_double(f[1], source, lineno), detail::parse_double(f[2], source, lineno)};
    if (parsed.empty() || parsed.back().id != f[0]) {
      if (seen.contains(f[0])) throw detail::parse_error(source, lineno, "rows of id " + f[0] + " are not contiguous");
      seen.emplace(f[0], parsed.size());
      parsed.emplace_back();
      parsed.back().id = f[0];
    }
    parsed.back().observations.push_back(o);
  }
  for (auto& r : parsed) {
    r.age_days = detail::default_age(r);
    if (!meta) continue;
    if (auto it = meta->find(r.id); it != meta->end()) {
      r.title = it->second.title;
      r.category = it->second.category;
      if (it->second.age_days) r.age_days = *it->second.age_days;
      r.total_views = it->second.total_views;
    }
  }
  return validate_records(std::move(parsed));
}

inline IngestResult read_series_json(std::istream& in, const std::string& source = "<json>") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, source + ": " + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::ParseError, source + ": top level must be an array");
  std::vector<SeriesRecord> parsed;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& obj = doc[i];
    auto fail = [&](const std::string& what) {
      return Error(ErrorCode::ParseError, source + ": record " + std::to_string(i) + ": " + what);
    };
    try {
      if (!obj.is_object()) throw fail("not an object");
      SeriesRecord r;
      r.id = obj.at("id").get<std::string>();
      if (auto it = obj.find("title"); it != obj.end() && !it->is_null()) r.title = it->get<std::string>();
      if (auto it = obj.find("category"); it != obj.end() && !it->is_null()) {
        r.category = canonical_category(it->get<std::string>());
      }
      for (const auto& pt : obj.at("observations")) {
        if (!pt.is_array() || pt.size() != 2) throw fail("observations must be [t, y] pairs");
        r.observations.push_back({pt[0].get<double>(), pt[1].get<double>()});
      }
      r.age_days = detail::default_age(r);
      if (auto it = obj.find("age_days"); it != obj.end() && !it->is_null()) r.age_days = it->get<std::int64_t>();
      if (auto it = obj.find("total_views"); it != obj.end() && !it->is_null()) {
        r.total_views = it->get<std::int64_t>();
      }
      parsed.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw fail(e.what());
    }
  }
  return validate_records(std::move(parsed));
}

inline bool looks_like_json(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".json";
}

/// Reads a CSV or JSON series file (chosen by extension), with optional CSV metadata sidecar.
inline IngestResult ingest(const std::filesystem::path& path,
                           const std::optional<std::filesystem::path>& meta_path = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  if (looks_like_json(path)) return read_series_json(in, path.string());
  std::map<std::string, Metadata> meta;
  if (meta_path) {
    std::ifstream min(*meta_path, std::ios::binary);
    if (!min) throw Error(ErrorCode::IoError, "cannot open " + meta_path->string());
    meta = read_metadata_csv(min, meta_path->string());
  }
  return read_series_csv(in, meta_path ? &meta : nullptr, path.string());
}

inline void write_series_csv(std::ostream& out, std::span<const SeriesRecord> records) {
  out << "id,t,y\n";
  for (const auto& r : records) {
    const auto id = csv::quote(r.id);
    for (const auto& o : r.observations) out << id << ',' << format_double(o.t) << ',' << format_double(o.y) << '\n';
  }
}

inline void write_metadata_csv(std::ostream& out, std::span<const SeriesRecord> records) {
  out << "id,title,category,age_days,total_views\n";
  for (const auto& r : records) {
    out << csv::quote(r.id) << ',' << csv::quote(r.title.value_or("")) << ',' << csv::quote(r.category.value_or(""))
        << ',' << r.age_days << ',';
    if (r.total_views) out << *r.total_views;
    out << '\n';
  }
}

inline nlohmann::json series_to_json(const SeriesRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  if (r.title) j["title"] = *r.title;
  if (r.category) j["category"] = *r.category;
  j["age_days"] = r.age_days;
  if (r.total_views) j["total_views"] = *r.total_views;
  auto obs = nlohmann::json::array();
  for (const auto& o : r.observations) obs.push_back({o.t, o.y});
  j["observations"] = std::move(obs);
  return j;
}

inline void write_series_json(std::ostream& out, std::span<const SeriesRecord> records) {
  auto arr = nlohmann::json::array();
  for (const auto& r : records) arr.push_back(series_to_json(r));
  out << arr.dump(1) << '\n';
}

inline void write_labels_csv(std::ostream& out, std::span<const LabeledRecord> corpus) {
  out << "id,kind,S0,M,lambda,k,noise_sigma\n";
  for (const auto& c : corpus) {
    const auto& l = c.label;
    out << csv::quote(l.id) << ',' << to_string(l.kind) << ',' << format_double(l.params.s0) << ','
        << format_double(l.params.m) << ',' << format_double(l.params.lambda) << ',' << format_double(l.params.k)
        << ',' << format_double(l.noise_sigma) << '\n';
  }
}

inline std::map<std::string, SynthLabel> read_labels_csv(std::istream& in, const std::string& source = "<labels>") {
  std::map<std::string, SynthLabel> out;
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw detail::parse_error(source, 1, "empty labels file");
  while (std::getline(in, line)) {
    ++lineno;
    const auto row = csv::trim_cr(line);
    if (row.empty()) continue;
    const auto f = csv::split(row);
    if (f.size() != 7) throw detail::parse_error(source, lineno, "expected 7 fields");
    const auto kind = parse_kind(f[1]);
    if (!kind) throw detail::parse_error(source, lineno, "unknown kind " + f[1]);
    SynthLabel l;
    l.id = f[0];
    l.kind = *kind;
    l.params = {detail::parse_double(f[2], source, lineno), detail::parse_double(f[3], source, lineno),
                detail::parse_double(f[4], source, lineno), detail::parse_double(f[5], source, lineno)};
    l.noise_sigma = detail::parse_double(f[6], source, lineno);
    out.emplace(l.id, l);
  }
  return out;
}

/// Writes `content` to `path` through a temporary sibling and a rename.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace viewfit
