#include "herc/sweep.hpp"

#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace herc {

std::vector<SweepRow> negative_sweep(const TrainConfig& base, std::span<const std::size_t> ks,
                                     const Dataset& data) {
  if (ks.empty()) throw std::invalid_argument("negative_sweep: no k values");
  std::vector<SweepRow> rows;
  for (std::size_t k : ks) {
    if (k == 0) throw std::invalid_argument("negative_sweep: k must be positive");
    TrainConfig cfg = base;
    cfg.negatives = k;
    const auto trained = train(cfg, data);
    rows.push_back({k, evaluate(trained.best, cfg.spec, data.test_aug, data.filter,
                                {cfg.threads, std::nullopt})});
  }
  return rows;
}

void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out) {
  out << "k,mrr,h1,h3,h10\n" << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.negatives << ',' << r.report.mrr << ',' << r.report.hits1 << ',' << r.report.hits3
        << ',' << r.report.hits10 << '\n';
  }
}

}  // namespace herc
