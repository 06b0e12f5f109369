#include "mmv/verification.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "mmv/error.hpp"
#include "mmv/templates_data.hpp"

namespace mmv {

namespace {

constexpr std::string_view kCrossValidationKeys[] = {"location", "date", "about", "tag"};
constexpr std::string_view kForensicKeys[] = {"metadata-validation", "authenticity", "auth-evidence", "synt-type",
                                              "other"};
constexpr std::string_view kDegree = "\xC2\xB0";
constexpr std::string_view kEnDash = "\xE2\x80\x93";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string as_text(const json& v) {
  if (v.is_null()) return {};
  if (v.is_string()) return v.get<std::string>();
  return v.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string field_text(const json& obj, std::string_view key) {
  if (!obj.is_object()) return {};
  const auto it = obj.find(key);
  return it == obj.end() ? std::string{} : as_text(*it);
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// One "<number>[°] [H]" component; hemisphere is 0 when absent.
struct CoordPart {
  double value = 0.0;
  char hemisphere = 0;
  bool negative_sign = false;
};

CoordPart parse_coord_part(std::string_view text, std::string_view whole) {
  auto bad = [&] { return Error(Errc::BadCoordinates, "cannot read coordinates '" + std::string(whole) + "'"); };
  std::string_view s = trim(text);
  CoordPart part;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    part.negative_sign = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty() || !(std::isdigit(static_cast<unsigned char>(s.front())) || s.front() == '.')) throw bad();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::fixed);
  if (ec != std::errc() || !std::isfinite(v)) throw bad();
  s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
  s = trim(s);
  if (s.substr(0, kDegree.size()) == kDegree) s = trim(s.substr(kDegree.size()));
  if (s.size() == 1) {
    const char h = static_cast<char>(std::toupper(static_cast<unsigned char>(s.front())));
    if (h != 'N' && h != 'S' && h != 'E' && h != 'W') throw bad();
    part.hemisphere = h;
  } else if (!s.empty()) {
    throw bad();
  }
  part.value = part.negative_sign ? -v : v;
  return part;
}

std::string shortest(double v) {
  char buf[512];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  return std::string(buf, ptr);
}

json tags_json(const json& v) {
  json out = json::array();
  if (v.is_array()) {
    for (const auto& t : v) out.push_back(as_text(t));
  } else if (v.is_string()) {
    std::string_view s = v.get_ref<const std::string&>();
    while (!s.empty()) {
      const auto comma = s.find(',');
      const auto item = trim(s.substr(0, comma));
      if (!item.empty()) out.push_back(std::string(item));
      if (comma == std::string_view::npos) break;
      s.remove_prefix(comma + 1);
    }
  }
  return out;
}

struct Exchange {
  std::optional<json> object;
  bool refusal = false;
  std::string failure;
  std::vector<std::string> notes;
  int calls = 0;
};

// One request, plus one re-ask when the reply is not schema-valid JSON.
Exchange exchange(TemplateId schema, LlmRequest request, LlmClient& client, const VerificationOptions& options) {
  Exchange ex;
  for (int round = 0; round < 2; ++round) {
    LlmResponse response;
    try {
      response = call_llm(request, client, options.retry, options.sleep);
      ex.calls += response.attempts;
    } catch (const Error& e) {
      if (e.code() != Errc::ExhaustedRetries) throw;
      ex.calls += options.retry.attempts;
      ex.failure = e.what();
      return ex;
    }
    if (response.refusal) {
      ex.refusal = true;
      ex.failure = std::string(to_string(schema)) + " request was refused by the model";
      return ex;
    }
    try {
      ex.object = parse_llm_json(response.raw_text, schema);
      return ex;
    } catch (const Error& e) {
      if (e.code() != Errc::NoJsonFound && e.code() != Errc::SchemaViolation) throw;
      if (round == 0) {
        ex.notes.push_back(std::string(to_string(schema)) + ": " + e.what() + "; asked again for valid JSON");
        request.user += kReaskSuffix;
      } else {
        ex.failure = std::string(to_string(schema)) + " reply unusable after re-ask: " + e.what();
      }
    }
  }
  return ex;
}

}  // namespace

std::string_view to_string(TemplateId id) {
  return id == TemplateId::cross_validation ? "cross_validation" : "forensic";
}

std::string_view template_body(TemplateId id) {
  return id == TemplateId::cross_validation ? generated::kPrompt1 : generated::kPrompt2;
}

std::string_view template_file_name(TemplateId id) {
  return id == TemplateId::cross_validation ? "prompt1.txt" : "prompt2.txt";
}

std::string render_template(std::string_view body, const Bindings& bindings) {
  std::string out;
  std::size_t i = 0;
  while (i < body.size()) {
    const std::size_t open = body.find("{{", i);
    if (open == std::string_view::npos) {
      out.append(body.substr(i));
      break;
    }
    const std::size_t close = body.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(body.substr(i));
      break;
    }
    const std::string_view name = body.substr(open + 2, close - open - 2);
    const auto it = bindings.find(name);
    if (it == bindings.end()) throw Error(Errc::MissingBinding, "no binding for {{" + std::string(name) + "}}");
    out.append(body.substr(i, open - i));
    out.append(it->second);
    i = close + 2;
  }
  return out;
}

std::string render_prompt(TemplateId id, const Bindings& bindings) {
  return render_template(template_body(id), bindings);
}

std::vector<std::string> missing_keys(const json& object, TemplateId schema) {
  std::vector<std::string> missing;
  auto check = [&](std::string_view key) {
    if (!object.is_object() || !object.contains(key)) missing.emplace_back(key);
  };
  if (schema == TemplateId::cross_validation) {
    for (auto k : kCrossValidationKeys) check(k);
  } else {
    for (auto k : kForensicKeys) check(k);
  }
  return missing;
}

json parse_llm_json(std::string_view raw_text, TemplateId schema) {
  std::optional<json> found = find_json_object(raw_text);
  if (!found) throw Error(Errc::NoJsonFound, "no JSON object in the reply");
  const auto missing = missing_keys(*found, schema);
  if (!missing.empty()) {
    std::string list;
    for (const auto& k : missing) list += (list.empty() ? "" : ", ") + ("\"" + k + "\"");
    throw Error(Errc::SchemaViolation, "missing key(s) " + list);
  }
  return std::move(*found);
}

CalendarDate parse_date(std::string_view text) {
  const std::string_view s = trim(text);
  auto bad = [&] { return Error(Errc::BadDate, "expected dd/mm/yyyy, got '" + std::string(text) + "'"); };
  const auto a = s.find('/');
  const auto b = a == std::string_view::npos ? a : s.find('/', a + 1);
  if (b == std::string_view::npos) throw bad();
  const auto d = s.substr(0, a);
  const auto m = s.substr(a + 1, b - a - 1);
  const auto y = s.substr(b + 1);
  if (!all_digits(d) || !all_digits(m) || !all_digits(y) || d.size() > 2 || m.size() > 2 || y.size() != 4) {
    throw bad();
  }
  const std::chrono::year_month_day date{std::chrono::year{std::stoi(std::string(y))},
                                         std::chrono::month{static_cast<unsigned>(std::stoi(std::string(m)))},
                                         std::chrono::day{static_cast<unsigned>(std::stoi(std::string(d)))}};
  if (!date.ok()) throw Error(Errc::BadDate, "'" + std::string(text) + "' is not a calendar date");
  return date;
}

DateSpan parse_date_span(std::string_view text) {
  const std::string_view s = trim(text);
  std::size_t sep = s.find(kEnDash);
  std::size_t sep_len = kEnDash.size();
  if (const auto dash = s.find('-'); dash != std::string_view::npos && (sep == std::string_view::npos || dash < sep)) {
    sep = dash;
    sep_len = 1;
  }
  if (sep == std::string_view::npos) {
    const CalendarDate d = parse_date(s);
    return {d, d};
  }
  CalendarDate a = parse_date(s.substr(0, sep));
  CalendarDate b = parse_date(s.substr(sep + sep_len));
  if (std::chrono::sys_days{b} < std::chrono::sys_days{a}) std::swap(a, b);
  return {a, b};
}

std::string format_date(const CalendarDate& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02u/%02u/%04d", static_cast<unsigned>(date.day()),
                static_cast<unsigned>(date.month()), static_cast<int>(date.year()));
  return buf;
}

ConsensusLabel classify_consensus_days(int span_days) {
  if (span_days < 30) return ConsensusLabel::Consensus;
  if (span_days <= 92) return ConsensusLabel::Partial;
  return ConsensusLabel::NonVerifiable;
}

ConsensusLabel classify_consensus(const DateSpan& span) { return classify_consensus_days(span.days()); }

GeoPoint parse_coordinates(std::string_view text) {
  const auto comma = text.find(',');
  if (comma == std::string_view::npos || text.find(',', comma + 1) != std::string_view::npos) {
    throw Error(Errc::BadCoordinates, "expected 'lat, lon' in '" + std::string(text) + "'");
  }
  const CoordPart lat = parse_coord_part(text.substr(0, comma), text);
  const CoordPart lon = parse_coord_part(text.substr(comma + 1), text);
  GeoPoint p;
  if (lat.hemisphere != 0 || lon.hemisphere != 0) {
    const bool lat_ok = lat.hemisphere == 'N' || lat.hemisphere == 'S';
    const bool lon_ok = lon.hemisphere == 'E' || lon.hemisphere == 'W';
    if (!lat_ok || !lon_ok || lat.negative_sign || lon.negative_sign) {
      throw Error(Errc::BadCoordinates, "mixed or misplaced hemispheres in '" + std::string(text) + "'");
    }
    p.lat = lat.hemisphere == 'S' ? -lat.value : lat.value;
    p.lon = lon.hemisphere == 'W' ? -lon.value : lon.value;
  } else {
    p.lat = lat.value;
    p.lon = lon.value;
  }
  if (!p.valid()) throw Error(Errc::BadCoordinates, "coordinates out of range in '" + std::string(text) + "'");
  return p;
}

std::string format_coordinates(const GeoPoint& point) {
  return shortest(std::fabs(point.lat)) + std::string(kDegree) + (point.lat < 0 ? " S, " : " N, ") +
         shortest(std::fabs(point.lon)) + std::string(kDegree) + (point.lon < 0 ? " W" : " E");
}

CrossValidation cross_validation_from_json(const json& object, std::vector<std::string>& notes) {
  CrossValidation cv;
  const json& location = object.at("location");
  std::string coordinates_text;
  if (location.is_object()) {
    cv.location_name = field_text(location, "location");
    coordinates_text = field_text(location, "coordinates");
  } else {
    cv.location_name = as_text(location);
  }
  if (!coordinates_text.empty()) {
    try {
      cv.coordinates = parse_coordinates(coordinates_text);
    } catch (const Error& e) {
      notes.push_back(std::string("coordinates not usable: ") + e.what());
    }
  }

  const json& date = object.at("date");
  std::string claimed;
  if (date.is_object()) {
    cv.date_text = field_text(date, "date");
    claimed = date.contains("concensus") ? field_text(date, "concensus") : field_text(date, "consensus");
    cv.notes = field_text(date, "notes");
  } else {
    cv.date_text = as_text(date);
  }
  const std::optional<ConsensusLabel> claimed_label = consensus_label_from_string(trim(claimed));
  if (!cv.date_text.empty()) {
    try {
      cv.date_span = parse_date_span(cv.date_text);
    } catch (const Error& e) {
      notes.push_back(std::string("date not machine-readable: ") + e.what());
    }
  }
  if (cv.date_span) {
    cv.consensus = classify_consensus(*cv.date_span);
    if (claimed_label && *claimed_label != cv.consensus) {
      notes.push_back("consensus label overridden: the model said \"" + claimed + "\" but the " +
                      std::to_string(cv.date_span->days()) + "-day span " + format_date(cv.date_span->earliest) +
                      " - " + format_date(cv.date_span->latest) + " classifies as " +
                      std::string(to_string(cv.consensus)));
    }
  } else {
    cv.consensus = claimed_label.value_or(ConsensusLabel::NonVerifiable);
  }

  const json& about = object.at("about");
  if (about.is_object()) {
    cv.consensus_about = field_text(about, "consensus");
    cv.conflicts = field_text(about, "conflicts");
  } else {
    cv.consensus_about = as_text(about);
  }
  for (const auto& t : tags_json(object.at("tag"))) cv.tags.push_back(t.get<std::string>());
  return cv;
}

ForensicAnalysis forensic_from_json(const json& object) {
  ForensicAnalysis f;
  const json& mv = object.at("metadata-validation");
  if (mv.is_object()) {
    f.metadata_validation.location = field_text(mv, "location");
    f.metadata_validation.event = field_text(mv, "event");
    f.metadata_validation.people = field_text(mv, "people");
  } else {
    f.metadata_validation.location = as_text(mv);
  }
  f.authenticity = as_text(object.at("authenticity"));
  f.auth_evidence = as_text(object.at("auth-evidence"));
  f.synt_type = as_text(object.at("synt-type"));
  f.other = as_text(object.at("other"));
  return f;
}

StepResult<CrossValidation> run_cross_validation(const EvidenceBuffer& buffer, LlmClient& client,
                                                 const VerificationOptions& options) {
  StepResult<CrossValidation> result;
  if (buffer.documents.empty()) result.notes.push_back("no external sources");
  LlmRequest request;
  request.purpose = std::string(to_string(TemplateId::cross_validation));
  request.user = render_prompt(TemplateId::cross_validation, {{"sources", dump_json(json(buffer.documents))}});
  Exchange ex = exchange(TemplateId::cross_validation, std::move(request), client, options);
  result.llm_calls = ex.calls;
  result.refusal = ex.refusal;
  result.failure = ex.failure;
  result.notes.insert(result.notes.end(), ex.notes.begin(), ex.notes.end());
  if (ex.object) result.value = cross_validation_from_json(*ex.object, result.notes);
  return result;
}

std::string forensic_metadata_binding(const std::optional<CrossValidation>& crossval, const CaseMetadata& metadata,
                                      std::span<const Transcript> transcripts) {
  json t = json::array();
  for (const auto& tr : transcripts) {
    std::string text;
    for (const auto& seg : tr.segments) {
      if (seg.text.empty()) continue;
      if (!text.empty()) text += ' ';
      text += seg.text;
    }
    t.push_back({{"asset_id", tr.asset_id}, {"language", tr.language}, {"text", text}});
  }
  json m = {{"case_metadata", metadata},
            {"cross_validation", crossval ? json(*crossval) : json(nullptr)},
            {"transcripts", t}};
  return dump_json(m);
}

StepResult<ForensicAnalysis> run_forensic_analysis(std::span<const ForensicImage> images,
                                                   const std::optional<CrossValidation>& crossval,
                                                   const CaseMetadata& metadata,
                                                   std::span<const Transcript> transcripts, LlmClient& client,
                                                   const VerificationOptions& options) {
  if (images.empty()) throw Error(Errc::NoImages, "forensic analysis needs at least one image");
  StepResult<ForensicAnalysis> result;
  std::string listing;
  LlmRequest request;
  request.purpose = std::string(to_string(TemplateId::forensic));
  for (std::size_t i = 0; i < images.size(); ++i) {
    listing += "Image " + std::to_string(i + 1) + ": " + images[i].label + "\n";
    request.images.push_back({"image/jpeg", images[i].base64_jpeg});
  }
  request.user = render_prompt(TemplateId::forensic,
                               {{"images", listing}, {"metadata", forensic_metadata_binding(crossval, metadata, transcripts)}});
  Exchange ex = exchange(TemplateId::forensic, std::move(request), client, options);
  result.llm_calls = ex.calls;
  result.refusal = ex.refusal;
  result.failure = ex.failure;
  result.notes = std::move(ex.notes);
  if (ex.object) result.value = forensic_from_json(*ex.object);
  return result;
}

}  // namespace mmv
