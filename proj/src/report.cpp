// Copyright 2026 The sonoclass Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sonoclass/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "sonoclass/error.hpp"

namespace sonoclass {
namespace {

using nlohmann::json;

std::string fixed(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string full(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string sig(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

void check_consistent_test2(const ReportBundle& bundle) {
  if (bundle.models.empty()) {
    throw PipelineError(ErrorCode::EmptyBatch, "report has no model results");
  }
  const bool first = bundle.models.front().has_test2;
  for (const ModelResults& m : bundle.models) {
    if (m.has_test2 != first) {
      throw PipelineError(ErrorCode::InvalidConfig,
                          "model '" + m.model + "' disagrees with the others about Test-2");
    }
  }
}

}  // namespace

std::string render_report_markdown(const ReportBundle& bundle) {
  check_consistent_test2(bundle);
  const bool t2 = bundle.models.front().has_test2;

  std::ostringstream os;
  os << "# Classification report\n\n";
  os << "Patient-grouped " << bundle.k << "-fold cross-validation of grayscale ultrasound "
     << "binary classifiers. Table values are means over the " << bundle.k << " fold models; "
     << "precision and recall are macro averages over the two classes and F1 is the harmonic "
     << "mean of those two values.\n\n";

  os << "## Results\n\n";
  os << "| Model |";
  for (const char* metric : {"Precision", "Recall", "F1", "Accuracy", "AUC"}) {
    if (t2) {
      os << " " << metric << " Test-1 | " << metric << " Test-2 |";
    } else {
      os << " " << metric << " Test-1 |";
    }
  }
  os << "\n|---|";
  for (int i = 0; i < 5 * (t2 ? 2 : 1); ++i) os << "---|";
  os << "\n";

  for (const ModelResults& m : bundle.models) {
    os << "| " << m.model << " |";
    const MetricSummary AggregateRow::* fields[] = {
        &AggregateRow::precision, &AggregateRow::recall, &AggregateRow::f1,
        &AggregateRow::accuracy, &AggregateRow::auc};
    for (std::size_t i = 0; i < 5; ++i) {
      const int digits = (i == 4) ? 3 : 2;
      os << " " << fixed((m.test1.row.*fields[i]).mean, digits) << " |";
      if (t2) os << " " << fixed((m.test2.row.*fields[i]).mean, digits) << " |";
    }
    os << "\n";
  }
  if (!t2) {
    os << "\nNo second test set was configured, so the Test-2 columns are omitted.\n";
  }

  os << "\n## Fold dispersion\n\n";
  os << "Sample standard deviation of each metric across fold models"
     << (t2 ? " (Test-1)" : "") << ".\n\n";
  os << "| Model | Precision | Recall | F1 | Accuracy | AUC |\n";
  os << "|---|---|---|---|---|---|\n";
  for (const ModelResults& m : bundle.models) {
    os << "| " << m.model << " | " << fixed(m.test1.row.precision.stddev, 3) << " | "
       << fixed(m.test1.row.recall.stddev, 3) << " | " << fixed(m.test1.row.f1.stddev, 3)
       << " | " << fixed(m.test1.row.accuracy.stddev, 3) << " | "
       << fixed(m.test1.row.auc.stddev, 3) << " |\n";
  }

  if (!bundle.pairwise.empty()) {
    os << "\n## Pairwise AUC comparisons\n\n";
    os << "Two-sided paired t-test over per-fold Test-1 AUC, " << (bundle.k - 1)
       << " degrees of freedom.\n\n";
    os << "| Model A | Model B | t | p | Note |\n";
    os << "|---|---|---|---|---|\n";
    for (const PairwiseComparison& c : bundle.pairwise) {
      os << "| " << c.model_a << " | " << c.model_b << " | " << sig(c.ttest.t, 6) << " | "
         << sig(c.ttest.p, 6) << " | " << (c.ttest.zero_variance ? "zero variance" : "") << " |\n";
    }
  }

  os << "\n## Provenance\n\n";
  os << "- config_hash: `" << bundle.config_hash << "`\n";
  os << "- seed: " << bundle.seed << "\n";
  os << "- folds: " << bundle.k << "\n";
  return os.str();
}

void write_fold_metrics_json(const std::string& path, const FoldMetricsFile& file) {
  json j;
  j["model"] = file.model;
  j["fold"] = file.fold;
  j["test_set"] = test_set_name(file.test_set);
  j["config_hash"] = file.config_hash;
  j["seed"] = file.seed;
  j["n"] = file.matrix.total();
  j["confusion"] = {{"tp", file.matrix.tp},
                    {"fp", file.matrix.fp},
                    {"tn", file.matrix.tn},
                    {"fn", file.matrix.fn},
                    {"threshold", file.matrix.threshold}};
  j["precision"] = file.metrics.precision;
  j["recall"] = file.metrics.recall;
  j["f1"] = file.metrics.f1;
  j["accuracy"] = file.metrics.accuracy;
  j["auc"] = file.metrics.auc;
  j["per_class"] = {{"precision_positive", file.metrics.precision_positive},
                    {"recall_positive", file.metrics.recall_positive},
                    {"f1_positive", file.metrics.f1_positive},
                    {"precision_negative", file.metrics.precision_negative},
                    {"recall_negative", file.metrics.recall_negative},
                    {"f1_negative", file.metrics.f1_negative}};
  j["weighted"] = {{"precision_weighted", file.metrics.precision_weighted},
                   {"recall_weighted", file.metrics.recall_weighted},
                   {"f1_weighted", file.metrics.f1_weighted}};
  j["undefined_metrics"] = file.metrics.undefined_metrics;

  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw PipelineError(ErrorCode::IoFailure, "cannot write metrics file: " + path);
  f << j.dump(2) << "\n";
  if (!f) throw PipelineError(ErrorCode::IoFailure, "short write: " + path);
}

FoldMetricsFile read_fold_metrics_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw PipelineError(ErrorCode::MissingFile, "cannot open metrics file: " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw PipelineError(ErrorCode::MalformedRow, path + ": " + e.what());
  }
  try {
    FoldMetricsFile out;
    out.model = j.at("model").get<std::string>();
    out.fold = j.at("fold").get<int>();
    const std::string set = j.at("test_set").get<std::string>();
    if (set == "test1") {
      out.test_set = TestSet::Test1;
    } else if (set == "test2") {
      out.test_set = TestSet::Test2;
    } else {
      throw PipelineError(ErrorCode::MalformedRow, path + ": bad test_set '" + set + "'");
    }
    out.config_hash = j.at("config_hash").get<std::string>();
    out.seed = j.at("seed").get<std::uint64_t>();
    const json& c = j.at("confusion");
    out.matrix.tp = c.at("tp").get<long>();
    out.matrix.fp = c.at("fp").get<long>();
    out.matrix.tn = c.at("tn").get<long>();
    out.matrix.fn = c.at("fn").get<long>();
    out.matrix.threshold = c.at("threshold").get<double>();
    out.metrics.precision = j.at("precision").get<double>();
    out.metrics.recall = j.at("recall").get<double>();
    out.metrics.f1 = j.at("f1").get<double>();
    out.metrics.accuracy = j.at("accuracy").get<double>();
    out.metrics.auc = j.at("auc").get<double>();
    const json& pc = j.at("per_class");
    out.metrics.precision_positive = pc.at("precision_positive").get<double>();
    out.metrics.recall_positive = pc.at("recall_positive").get<double>();
    out.metrics.f1_positive = pc.at("f1_positive").get<double>();
    out.metrics.precision_negative = pc.at("precision_negative").get<double>();
    out.metrics.recall_negative = pc.at("recall_negative").get<double>();
    out.metrics.f1_negative = pc.at("f1_negative").get<double>();
    const json& w = j.at("weighted");
    out.metrics.precision_weighted = w.at("precision_weighted").get<double>();
    out.metrics.recall_weighted = w.at("recall_weighted").get<double>();
    out.metrics.f1_weighted = w.at("f1_weighted").get<double>();
    out.metrics.undefined_metrics = j.at("undefined_metrics").get<std::vector<std::string>>();
    return out;
  } catch (const json::exception& e) {
    throw PipelineError(ErrorCode::MalformedRow, path + ": " + e.what());
  }
}

void write_scores_csv(const std::string& path, const ScoredSet& scores,
                      const std::string& config_hash) {
  validate_scored_set(scores);
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw PipelineError(ErrorCode::IoFailure, "cannot write scores file: " + path);
  f << "# config_hash=" << config_hash << " model=" << scores.model_name
    << " fold=" << scores.fold_index << " test_set=" << test_set_name(scores.test_set) << "\n";
  f << "image_id,score,label\n";
  for (const ScoredSample& s : scores.samples) {
    f << s.image_id << ',' << full(s.score) << ',' << s.label << '\n';
  }
  if (!f) throw PipelineError(ErrorCode::IoFailure, "short write: " + path);
}

ScoresFile read_scores_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw PipelineError(ErrorCode::MissingFile, "cannot open scores file: " + path);
  ScoresFile out;
  std::string line;
  if (!std::getline(f, line) || line.rfind("# ", 0) != 0) {
    throw PipelineError(ErrorCode::MalformedRow, path + ": missing metadata comment");
  }
  {
    std::istringstream meta(line.substr(2));
    std::string kv;
    while (meta >> kv) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
      if (key == "config_hash") {
        out.config_hash = value;
      } else if (key == "model") {
        out.scores.model_name = value;
      } else if (key == "fold") {
        out.scores.fold_index = std::stoi(value);
      } else if (key == "test_set") {
        out.scores.test_set = value == "test2" ? TestSet::Test2 : TestSet::Test1;
      }
    }
  }
  if (!std::getline(f, line) || line != "image_id,score,label") {
    throw PipelineError(ErrorCode::MalformedRow, path + ": bad scores header");
  }
  std::size_t line_no = 2;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id, score_s, label_s;
    if (!std::getline(ss, id, ',') || !std::getline(ss, score_s, ',') ||
        !std::getline(ss, label_s)) {
      throw PipelineError(ErrorCode::MalformedRow,
                          path + ": line " + std::to_string(line_no));
    }
    ScoredSample s;
    s.image_id = id;
    try {
      s.score = std::stod(score_s);
      s.label = std::stoi(label_s);
    } catch (const std::exception&) {
      throw PipelineError(ErrorCode::MalformedRow,
                          path + ": line " + std::to_string(line_no));
    }
    out.scores.samples.push_back(std::move(s));
  }
  validate_scored_set(out.scores);
  return out;
}

void write_roc_tsv(const std::string& path, const std::vector<RocPoint>& curve,
                   const std::string& config_hash) {
  if (curve.empty()) {
    throw PipelineError(ErrorCode::EmptyBatch, "refusing to write an empty ROC file");
  }
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw PipelineError(ErrorCode::IoFailure, "cannot write ROC file: " + path);
  f << "# config_hash=" << config_hash << "\n";
  f << "fpr\ttpr\tthreshold\n";
  for (const RocPoint& p : curve) {
    f << full(p.fpr) << '\t' << full(p.tpr) << '\t' << full(p.threshold) << '\n';
  }
  if (!f) throw PipelineError(ErrorCode::IoFailure, "short write: " + path);
}

}  // namespace sonoclass
