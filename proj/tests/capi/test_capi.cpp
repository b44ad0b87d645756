#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>
#include <supwma/supwma.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("supwma_capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  supwma_string_free(s);
  return out;
}

// Small corpus: 3 clusters plus outliers, written by the library itself.
fs::path small_corpus(const std::string& name) {
  const fs::path dir = scratch(name);
  char* manifest = nullptr;
  const std::string cfg = R"({"clusters": 3, "streamlines_per_cluster": 30, "confusable_pairs": 0})";
  REQUIRE(supwma_gen_dataset(cfg.c_str(), dir.string().c_str(), &manifest) == SUPWMA_OK);
  CHECK(take(manifest) == (dir / "manifest.json").string());
  return dir;
}

}  // namespace

TEST_CASE("version and flops") {
  CHECK(std::strlen(supwma_version()) > 0);
  supwma_arch arch;
  supwma_arch_default(&arch);
  CHECK(arch.points == 15);
  CHECK(arch.classes == 199);
  uint64_t macs = 0;
  REQUIRE(supwma_count_flops(&arch, &macs) == SUPWMA_OK);
  CHECK(macs == 2798144u);
  arch.classes = 1;
  CHECK(supwma_count_flops(&arch, &macs) == SUPWMA_ERR_INVALID_ARGUMENT);
  CHECK(std::string(supwma_last_error()).find("class count") != std::string::npos);
  CHECK(supwma_count_flops(nullptr, &macs) == SUPWMA_ERR_INVALID_ARGUMENT);
}

TEST_CASE("error codes for files") {
  supwma_streamlines* set = nullptr;
  CHECK(supwma_streamlines_read("/nonexistent/x.slp", nullptr, &set) == SUPWMA_ERR_IO);
  CHECK(set == nullptr);
  const fs::path dir = scratch("errors");
  std::ofstream(dir / "bad.slp") << "nope";
  CHECK(supwma_streamlines_read((dir / "bad.slp").string().c_str(), nullptr, &set) == SUPWMA_ERR_FORMAT);
  CHECK(std::string(supwma_last_error()).find("bad magic") != std::string::npos);
  supwma_model* model = nullptr;
  CHECK(supwma_model_load((dir / "bad.slp").string().c_str(), &model) == SUPWMA_ERR_FORMAT);
  double m[16];
  CHECK(supwma_read_affine((dir / "bad.slp").string().c_str(), m) == SUPWMA_ERR_FORMAT);
}

TEST_CASE("streamline sets, labels and affine") {
  const fs::path dir = small_corpus("sets");
  supwma_streamlines* set = nullptr;
  REQUIRE(supwma_streamlines_read((dir / "test.slp").string().c_str(), (dir / "test_labels.csv").string().c_str(),
                                  &set) == SUPWMA_OK);
  const size_t n = supwma_streamlines_count(set);
  CHECK(n > 0);
  CHECK(supwma_streamlines_has_labels(set) == 1);
  std::vector<int32_t> labels(n);
  CHECK(supwma_streamlines_labels(set, labels.data(), n - 1) == SUPWMA_ERR_INVALID_ARGUMENT);
  REQUIRE(supwma_streamlines_labels(set, labels.data(), n) == SUPWMA_OK);

  const double shift[16] = {1, 0, 0, 5, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  REQUIRE(supwma_streamlines_apply_affine(set, shift) == SUPWMA_OK);
  const double singular[16] = {0};
  CHECK(supwma_streamlines_apply_affine(set, singular) == SUPWMA_ERR_INVALID_ARGUMENT);

  const std::string out_slp = (dir / "copy.slp").string(), out_csv = (dir / "copy.csv").string();
  REQUIRE(supwma_streamlines_write(set, out_slp.c_str(), out_csv.c_str()) == SUPWMA_OK);
  supwma_streamlines* back = nullptr;
  REQUIRE(supwma_streamlines_read(out_slp.c_str(), out_csv.c_str(), &back) == SUPWMA_OK);
  CHECK(supwma_streamlines_count(back) == n);
  supwma_streamlines_free(back);
  supwma_streamlines_free(set);
  supwma_streamlines_free(nullptr);
}

TEST_CASE("model lifecycle, predict and evaluate") {
  const fs::path dir = small_corpus("model");
  supwma_arch arch;
  supwma_arch_default(&arch);
  arch.classes = 4;
  supwma_model* model = nullptr;
  REQUIRE(supwma_model_create(&arch, 3, &model) == SUPWMA_OK);
  const std::string ckpt = (dir / "m.ckpt").string();
  REQUIRE(supwma_model_save(model, ckpt.c_str()) == SUPWMA_OK);
  supwma_model* loaded = nullptr;
  REQUIRE(supwma_model_load(ckpt.c_str(), &loaded) == SUPWMA_OK);
  supwma_arch got;
  REQUIRE(supwma_model_arch(loaded, &got) == SUPWMA_OK);
  CHECK(got.classes == 4);
  CHECK(got.encoder_dims[2] == 1024);

  supwma_streamlines* set = nullptr;
  REQUIRE(supwma_streamlines_read((dir / "test.slp").string().c_str(), (dir / "test_labels.csv").string().c_str(),
                                  &set) == SUPWMA_OK);
  const size_t n = supwma_streamlines_count(set);
  std::vector<int32_t> a(n), b(n);
  REQUIRE(supwma_predict(model, set, 1, a.data(), n) == SUPWMA_OK);
  REQUIRE(supwma_predict(loaded, set, 2, b.data(), n) == SUPWMA_OK);
  CHECK(a == b);
  CHECK(supwma_predict(model, set, 1, a.data(), n - 1) == SUPWMA_ERR_INVALID_ARGUMENT);

  char* report = nullptr;
  const int32_t expected[] = {0, 1, 2};
  REQUIRE(supwma_evaluate(model, set, expected, 3, 0, 1, &report) == SUPWMA_OK);
  const auto j = nlohmann::json::parse(take(report));
  CHECK(j.at("samples") == n);
  CHECK(j.at("cir_threshold") == 20);
  CHECK(j.contains("confusion"));
  CHECK(j.at("accuracy").get<double>() >= 0.0);

  supwma_streamlines_free(set);
  supwma_model_free(loaded);
  supwma_model_free(model);
}

TEST_CASE("cir") {
  std::vector<int32_t> pred;
  pred.insert(pred.end(), 25, 0);
  pred.insert(pred.end(), 19, 1);
  pred.insert(pred.end(), 20, 2);
  const int32_t expected[] = {0, 1, 2};
  double rate = 0;
  REQUIRE(supwma_cir(pred.data(), pred.size(), expected, 3, 20, &rate) == SUPWMA_OK);
  CHECK(rate == doctest::Approx(2.0 / 3.0));
  CHECK(supwma_cir(pred.data(), pred.size(), expected, 0, 20, &rate) == SUPWMA_ERR_INVALID_ARGUMENT);
}

TEST_CASE("train through the C API") {
  const fs::path dir = small_corpus("train");
  const nlohmann::json request = {
      {"train_slp", (dir / "train.slp").string()},
      {"train_labels", (dir / "train_labels.csv").string()},
      {"val_slp", (dir / "val.slp").string()},
      {"val_labels", (dir / "val_labels.csv").string()},
      {"out_dir", (dir / "run").string()},
      {"config", {{"scl_epochs", 1}, {"cls_epochs", 2}, {"scl_batch", 32}, {"cls_batch", 32}}}};
  char* report = nullptr;
  REQUIRE(supwma_train(request.dump().c_str(), SUPWMA_PHASE_BOTH, &report) == SUPWMA_OK);
  const auto j = nlohmann::json::parse(take(report));
  CHECK(j.at("phase") == "both");
  CHECK(j.at("arch").at("classes") == 4);
  CHECK(fs::exists(dir / "run" / "model.ckpt"));

  nlohmann::json cls_only = request;
  cls_only["out_dir"] = (dir / "cls").string();
  CHECK(supwma_train(cls_only.dump().c_str(), SUPWMA_PHASE_CLS, nullptr) == SUPWMA_ERR_INVALID_ARGUMENT);
  CHECK(supwma_train("{not json", SUPWMA_PHASE_BOTH, nullptr) == SUPWMA_ERR_INVALID_ARGUMENT);
  CHECK(supwma_train(R"({"train_slp": "x"})", SUPWMA_PHASE_BOTH, nullptr) == SUPWMA_ERR_INVALID_ARGUMENT);
}
