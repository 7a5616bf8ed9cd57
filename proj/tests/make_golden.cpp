// Regenerates tests/golden/session_smile.{jsonl,report.json}.
// Usage: make_golden <golden-dir>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "hc/rehab/report.hpp"
#include "hc/rehab/session_log.hpp"
#include "sessions.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_golden <golden-dir>\n";
    return 1;
  }
  const std::filesystem::path dir = argv[1];
  const auto state = hc::testing::run_events(hc::rehab::new_session(hc::testing::smile_config()),
                                             hc::testing::golden_smile_events());
  hc::rehab::write_session_log(dir / "session_smile.jsonl", hc::rehab::session_log_of(state));
  std::ofstream out(dir / "session_smile.report.json", std::ios::binary);
  out << hc::rehab::serialize_report(hc::rehab::finalize_session(state));
  return out ? 0 : 2;
}
