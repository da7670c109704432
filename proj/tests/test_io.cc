#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "dln/error.hpp"
#include "dln/io.hpp"
#include "dln/reports.hpp"
#include "oracles.hpp"

using namespace dln;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dln_io_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("format_double reads back exactly") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("dataset CSV round trip") {
  const fs::path dir = scratch("csv");
  Rng rng(2);
  const Dataset d(oracle::random_matrix(rng, 3, 5), oracle::random_matrix(rng, 2, 5));
  const std::string csv = dataset_to_csv(d);
  CHECK(csv.rfind("x_1,x_2,x_3,y_1,y_2\n", 0) == 0);
  write_file_atomic(dir / "d.csv", csv);
  const Dataset back = read_dataset_csv(dir / "d.csv", 3, 2);
  CHECK(back.x() == d.x());
  CHECK(back.y() == d.y());
}

TEST_CASE("dataset CSV loader validates") {
  const fs::path dir = scratch("csv_bad");
  write_file_atomic(dir / "a.csv", "x_1,y_1\n1,2\n3,4\n");
  CHECK_THROWS_AS(read_dataset_csv(dir / "a.csv", 2, 1), Error);
  write_file_atomic(dir / "b.csv", "x_1,y_1\n1,2\n3\n");
  CHECK_THROWS_AS(read_dataset_csv(dir / "b.csv", 1, 1), Error);
  write_file_atomic(dir / "c.csv", "x_1,y_1\n1,abc\n");
  CHECK_THROWS_AS(read_dataset_csv(dir / "c.csv", 1, 1), Error);
  write_file_atomic(dir / "d.csv", "x_1,y_1\n");
  CHECK_THROWS_AS(read_dataset_csv(dir / "d.csv", 1, 1), Error);
  write_file_atomic(dir / "e.csv", "x_1,y_1\r\n1, -2.5\r\n");
  CHECK(read_dataset_csv(dir / "e.csv", 1, 1).y() == Matrix(1, 1, {-2.5}));
  try {
    read_dataset_csv(dir / "missing.csv", 1, 1);
    FAIL("expected an I/O error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
}

TEST_CASE("atomic writes leave no temporary files") {
  const fs::path dir = scratch("atomic");
  write_file_atomic(dir / "r.json", "{}\n");
  write_file_atomic(dir / "r.json", "{\"a\": 1}\n");
  CHECK(slurp(dir / "r.json") == "{\"a\": 1}\n");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 1);
  CHECK_THROWS_AS(write_file_atomic(dir / "no_such_dir" / "r.json", "x"), Error);
}

TEST_CASE("stack files accept a bare stack or a wrapped one") {
  const fs::path dir = scratch("stack");
  Rng rng(3);
  const WeightStack s = random_stack(DimChain({2, 3, 1}), rng);
  write_file_atomic(dir / "a.json", stack_to_json(s).dump());
  write_file_atomic(dir / "b.json", nlohmann::json{{"stack", stack_to_json(s)}}.dump());
  CHECK(read_stack_file(dir / "a.json") == s);
  CHECK(read_stack_file(dir / "b.json") == s);
  write_file_atomic(dir / "c.json", "{not json");
  CHECK_THROWS_AS(read_stack_file(dir / "c.json"), Error);
}

TEST_CASE("report documents") {
  const nlohmann::json doc = report_document("thm2", 7, to_json(theorem2_experiment(10, 7)));
  CHECK(doc["schema_version"] == 1);
  CHECK(doc["seed"] == 7);
  CHECK(doc["experiment"] == "thm2");
  CHECK(report_file_name("thm2", 7) == "thm2-7.report.json");

  const CriticalPointReport cp = verify_theorem3(
      zero_stack(DimChain({2, 2, 2, 2})), LossSpec::mse(Dataset(Matrix::identity(2), Matrix::identity(2))));
  const nlohmann::json j = to_json(cp);
  CHECK(j["verdict"] == "CRITICAL_SADDLE_CANDIDATE");
  CHECK(j["kernel_chain"]["k_star"] == 1);
  CHECK(j["residuals"].size() == 3);
  CHECK(j["kernel_chain"]["sigma_mins"].size() == 2);
  CHECK(j["tolerances"].contains("tol_crit"));
  CHECK(j["tolerances"].contains("tol_grad"));

  RunResult r{zero_stack(DimChain({1, 1}))};
  r.trace = {{0, 1.0, 2.0, 0.0}, {5, 0.5, 0.25, 0.125}};
  r.wall_seconds = 3.5;
  CHECK(trace_to_csv(r.trace) == "iter,F,grad_norm,step\n0,1,2,0\n5,0.5,0.25,0.125\n");
  CHECK(to_json(r).dump().find("wall") == std::string::npos);
}
