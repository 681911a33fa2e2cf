#include "ocov/selector.hpp"

#include "ocov/csv.hpp"
#include "ocov/errors.hpp"
#include "ocov/text.hpp"

namespace ocov::selector {

Selection select_pid(const iris::Record& record, const pid::Options& opts) {
  InvalidOnly failed{record.item_id, {}};
  for (auto scheme : pid::kSchemes) {
    for (auto& id : record.identifiers) {
      if (id.scheme != scheme) continue;
      auto r = pid::normalize(scheme, id.text, opts);
      if (pid::accepted(r)) {
        return SelectedPid{record.item_id, pid::value(r), pid::rank(scheme),
                           static_cast<int>(failed.rejections.size())};
      }
      failed.rejections.push_back(pid::rejection(r));
    }
  }
  return failed;
}

SchemeCounts ValidationStats::total() const {
  SchemeCounts t;
  for (auto& c : per_scheme) {
    t.raw += c.raw;
    t.invalid += c.invalid;
    t.valid += c.valid;
  }
  return t;
}

void ValidationStats::merge(const ValidationStats& o) {
  for (std::size_t i = 0; i < per_scheme.size(); ++i) {
    per_scheme[i].raw += o.per_scheme[i].raw;
    per_scheme[i].invalid += o.per_scheme[i].invalid;
    per_scheme[i].valid += o.per_scheme[i].valid;
  }
  doi_labels_stripped += o.doi_labels_stripped;
}

ValidationStats validation_stats(const std::vector<iris::Record>& records, const pid::Options& opts) {
  ValidationStats stats;
  for (auto& r : records) {
    for (auto& id : r.identifiers) {
      auto& c = stats.at(id.scheme);
      ++c.raw;
      auto result = pid::normalize(id.scheme, id.text, opts);
      if (pid::accepted(result)) {
        ++c.valid;
        if (id.scheme == pid::Scheme::Doi && pid::strip_doi_label(id.text).second) ++stats.doi_labels_stripped;
      } else {
        ++c.invalid;
      }
    }
  }
  return stats;
}

SelectionRun select_all(const std::vector<iris::Record>& records, const pid::Options& opts) {
  SelectionRun run;
  for (auto& r : records) {
    if (r.identifiers.empty()) continue;
    auto s = select_pid(r, opts);
    if (auto* ok = std::get_if<SelectedPid>(&s))
      run.selected.push_back(std::move(*ok));
    else
      run.invalid_only.push_back(std::get<InvalidOnly>(std::move(s)));
  }
  return run;
}

void write_selected(std::ostream& out, const std::vector<SelectedPid>& selected) {
  csv::Writer w(out);
  w.row(kSelectedHeader);
  for (auto& s : selected)
    w.row({std::string_view(s.item_id), std::string_view(s.pid.str()), pid::prefix(s.pid.scheme),
           std::string_view(std::to_string(s.fallback_depth))});
}

void write_invalid_only(std::ostream& out, const std::vector<InvalidOnly>& invalid) {
  csv::Writer w(out);
  w.row(kInvalidOnlyHeader);
  for (auto& inv : invalid) {
    std::string reasons;
    for (auto& rej : inv.rejections) {
      if (!reasons.empty()) reasons += '|';
      reasons += pid::prefix(rej.scheme);
      reasons += ':';
      reasons += pid::reason_name(rej.reason);
    }
    w.row({std::string_view(inv.item_id), std::string_view(reasons)});
  }
}

void write_stats(std::ostream& out, const ValidationStats& stats) {
  csv::Writer w(out);
  w.row(kStatsHeader);
  auto emit = [&](std::string_view name, const SchemeCounts& c) {
    w.row({name, std::string_view(std::to_string(c.raw)), std::string_view(std::to_string(c.invalid)),
           std::string_view(std::to_string(c.valid))});
  };
  for (auto s : pid::kSchemes) emit(pid::prefix(s), stats.at(s));
  emit("total", stats.total());
}

std::vector<SelectedPid> read_selected(const std::filesystem::path& path) {
  csv::Reader reader(path);
  auto h = csv::read_header(reader);
  const auto src = path.filename().string();
  const auto c_id = h.require("item_id", src), c_pid = h.require("pid", src), c_depth = h.require("fallback_depth", src);
  std::vector<SelectedPid> out;
  csv::Row row;
  while (reader.next(row)) {
    auto p = pid::parse_serialized(csv::cell(row, c_pid));
    if (!p) throw InputError(src + ": malformed pid '" + std::string(csv::cell(row, c_pid)) + "'");
    auto depth = csv::cell(row, c_depth);
    out.push_back({std::string(csv::cell(row, c_id)), *p, pid::rank(p->scheme),
                   text::all_digits(depth) ? std::stoi(std::string(depth)) : 0});
  }
  return out;
}

}  // namespace ocov::selector
