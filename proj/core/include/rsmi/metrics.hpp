#pragma once

namespace rsmi {

// Campaign aggregates. ASR = n_fooled / n_attacked (0 when nothing was
// attacked); RAcc = (n_correct - n_fooled) / n_total. Skipped records are the
// initially misclassified inputs, so n_attacked == n_correct.
struct MetricsSummary {
  double sacc = 0.0;
  double racc = 0.0;
  double asr = 0.0;
  double avg_queries_all = 0.0;      // mean over every attacked example
  double avg_queries_success = 0.0;  // mean over successful attacks only
  long n_total = 0;
  long n_correct = 0;
  long n_attacked = 0;
  long n_fooled = 0;
  long n_skipped = 0;
};

}  // namespace rsmi
