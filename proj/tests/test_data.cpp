#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "weedpilot/manifest.hpp"
#include "weedpilot/png_io.hpp"
#include "weedpilot/split.hpp"
#include "weedpilot/synth.hpp"

using namespace weedpilot;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "weedpilot_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ImageTensor tiny_image(int h = 16, int w = 16, std::uint8_t v = 100) {
  ImageTensor img(h, w);
  std::fill(img.data.begin(), img.data.end(), v);
  return img;
}

}  // namespace

TEST_CASE("taxonomy: 16 dense classes with distinct crop/negative ids") {
  const auto& tax = ClassTaxonomy::aiweeds16();
  CHECK(tax.num_classes() == 16);
  for (int i = 0; i < 16; ++i) CHECK(tax.cls(i).id == i);
  CHECK(tax.name_of(tax.negative_class_id()) == "Neg.");
  CHECK(tax.name_of(tax.crop_class_id()) == "Flax");
  CHECK(tax.negative_class_id() != tax.crop_class_id());
  CHECK(tax.id_of("VM.") >= 0);
  CHECK(tax.id_of("nope") == -1);

  ClassTaxonomy round = ClassTaxonomy::from_json(tax.to_json());
  CHECK(round.num_classes() == 16);
  CHECK(round.crop_class_id() == tax.crop_class_id());

  CHECK(class_folder_name("Neg.") == "neg");
  CHECK(class_folder_name("Flax") == "flax");
}

TEST_CASE("stratified split: floor rule and determinism") {
  const auto& tax = ClassTaxonomy::aiweeds16();

  SUBCASE("100 per class gives exactly 60/20/20") {
    Manifest m = generate_synthetic_corpus(CorpusSpec::uniform(tax, 100, 32, 32), 1, tax);
    SplitAssignment sa = stratified_split(m, 7, 5);
    for (int cls = 0; cls < 16; ++cls) {
      int tr = 0, va = 0, te = 0;
      for (std::size_t i = 0; i < m.samples().size(); ++i) {
        if (m.samples()[i].class_id != cls) continue;
        if (sa.roles[i] == Role::train) ++tr;
        if (sa.roles[i] == Role::val) ++va;
        if (sa.roles[i] == Role::test) ++te;
      }
      CHECK(tr == 60);
      CHECK(va == 20);
      CHECK(te == 20);
    }
  }

  SUBCASE("n=559 splits 335/111/113 per the floor rule") {
    // Oracle: recompute the rule independently.
    const int n = 559;
    const int train = static_cast<int>(std::floor(0.6 * n));
    const int val = static_cast<int>(std::floor(0.2 * n));
    CHECK(train == 335);
    CHECK(val == 111);
    CHECK(n - train - val == 113);
    SplitCounts c = split_counts(n);
    CHECK(c.train == 335);
    CHECK(c.val == 111);
    CHECK(c.test == 113);
  }

  SUBCASE("same seed identical, different seed different permutation") {
    Manifest m = generate_synthetic_corpus(CorpusSpec::uniform(tax, 20, 32, 32), 3, tax);
    SplitAssignment a = stratified_split(m, 11, 5);
    SplitAssignment b = stratified_split(m, 11, 5);
    CHECK(a.roles == b.roles);
    CHECK(a.folds == b.folds);
    SplitAssignment cdiff = stratified_split(m, 12, 5);
    CHECK(a.roles != cdiff.roles);
    // counts stay identical across seeds
    for (int cls = 0; cls < 16; ++cls) {
      auto count_role = [&](const SplitAssignment& sa, Role r) {
        int n = 0;
        for (std::size_t i = 0; i < m.samples().size(); ++i)
          if (m.samples()[i].class_id == cls && sa.roles[i] == r) ++n;
        return n;
      };
      CHECK(count_role(a, Role::train) == count_role(cdiff, Role::train));
      CHECK(count_role(a, Role::test) == count_role(cdiff, Role::test));
    }
  }

  SUBCASE("class smaller than k is an error naming the class") {
    Manifest m(tax);
    for (const auto& cls : tax.classes())
      for (int i = 0; i < (cls.short_name == "VM." ? 3 : 10); ++i) {
        Sample s;
        s.gen = GenSource{static_cast<std::uint64_t>(i), 32, 32};
        s.class_id = cls.id;
        s.width = s.height = 32;
        m.add(std::move(s));
      }
    CHECK_THROWS_WITH_AS(stratified_split(m, 1, 5), doctest::Contains("VM."), Error);
  }

  SUBCASE("roles partition and folds cover the pool") {
    Manifest m = generate_synthetic_corpus(CorpusSpec::uniform(tax, 23, 32, 32), 9, tax);
    SplitAssignment sa = stratified_split(m, 5, 5);
    for (std::size_t i = 0; i < m.samples().size(); ++i) {
      CHECK(sa.roles[i] != Role::none);
      if (sa.roles[i] == Role::test)
        CHECK(sa.folds[i] == -1);
      else
        CHECK((sa.folds[i] >= 0 && sa.folds[i] < 5));
    }
    // each fold's val view keeps the floor-rule val count
    SplitCounts c = split_counts(23);
    for (int f = 0; f < 5; ++f) {
      int va = 0;
      for (std::size_t i = 0; i < m.samples().size(); ++i)
        if (m.samples()[i].class_id == 2 && sa.role_in_fold(m, i, f) == Role::val) ++va;
      CHECK(va == c.val);
    }
  }
}

TEST_CASE("manifest: directory ingestion") {
  const auto& tax = ClassTaxonomy::aiweeds16();

  SUBCASE("16 folders x 10 images -> 160 samples") {
    fs::path root = fresh_dir("ingest_ok");
    for (const auto& cls : tax.classes()) {
      fs::path dir = root / class_folder_name(cls.short_name);
      fs::create_directories(dir);
      for (int i = 0; i < 10; ++i)
        write_png((dir / (std::to_string(i) + ".png")).string(), tiny_image());
    }
    Manifest m = build_manifest(root.string(), tax);
    CHECK(m.samples().size() == 160);
    for (const auto& [cls, n] : m.per_class_counts()) CHECK(n == 10);
  }

  SUBCASE("missing flax folder is a taxonomy error naming it") {
    fs::path root = fresh_dir("ingest_missing");
    for (const auto& cls : tax.classes()) {
      if (cls.short_name == "Flax") continue;
      fs::path dir = root / class_folder_name(cls.short_name);
      fs::create_directories(dir);
      write_png((dir / "0.png").string(), tiny_image());
    }
    CHECK_THROWS_WITH_AS(build_manifest(root.string(), tax), doctest::Contains("flax"), Error);
  }

  SUBCASE("undecodable files go to the skip report, not fatal") {
    fs::path root = fresh_dir("ingest_skip");
    for (const auto& cls : tax.classes()) {
      fs::path dir = root / class_folder_name(cls.short_name);
      fs::create_directories(dir);
      write_png((dir / "ok.png").string(), tiny_image());
    }
    std::ofstream junk(root / "neg" / "junk.png");
    junk << "this is not a png";
    junk.close();
    SkipReport skips;
    Manifest m = build_manifest(root.string(), tax, &skips);
    CHECK(m.samples().size() == 16);
    REQUIRE(skips.skipped.size() == 1);
    CHECK(skips.skipped[0].find("junk.png") != std::string::npos);
  }

  SUBCASE("jsonl round trip") {
    Manifest m = generate_synthetic_corpus(CorpusSpec::uniform(tax, 3, 40, 56), 4, tax);
    SplitAssignment sa = stratified_split(m, 2, 3);
    sa.apply(m);
    fs::path p = fresh_dir("jsonl") / "m.jsonl";
    m.save_jsonl(p.string());
    Manifest r = Manifest::load_jsonl(p.string(), tax);
    REQUIRE(r.samples().size() == m.samples().size());
    for (std::size_t i = 0; i < m.samples().size(); ++i) {
      CHECK(r.samples()[i].class_id == m.samples()[i].class_id);
      CHECK(r.samples()[i].gen->seed == m.samples()[i].gen->seed);
      CHECK(r.samples()[i].role == m.samples()[i].role);
      CHECK(r.samples()[i].fold == m.samples()[i].fold);
    }
  }
}

TEST_CASE("synthetic corpus") {
  const auto& tax = ClassTaxonomy::aiweeds16();

  SUBCASE("100 per class, seed 1: 1600 samples, bit-identical regeneration") {
    Manifest a = generate_synthetic_corpus(CorpusSpec::uniform(tax, 100, 48, 64), 1, tax);
    Manifest b = generate_synthetic_corpus(CorpusSpec::uniform(tax, 100, 48, 64), 1, tax);
    CHECK(a.samples().size() == 1600);
    for (std::size_t i = 0; i < a.samples().size(); ++i)
      CHECK(a.samples()[i].gen->seed == b.samples()[i].gen->seed);
    ImageTensor ia = render_synthetic(tax, a.samples()[37].class_id, *a.samples()[37].gen);
    ImageTensor ib = render_synthetic(tax, b.samples()[37].class_id, *b.samples()[37].gen);
    CHECK(ia == ib);
  }

  SUBCASE("field counts mirror the collection (Neg. 1474, CA. 990)") {
    CorpusSpec spec = CorpusSpec::field_counts(tax);
    CHECK(spec.counts.at(tax.id_of("Neg.")) == 1474);
    CHECK(spec.counts.at(tax.id_of("CA.")) == 990);
    double ratio = static_cast<double>(spec.counts.at(tax.id_of("Neg."))) /
                   spec.counts.at(tax.id_of("PM."));
    CHECK(ratio == doctest::Approx(2.8).epsilon(0.01));
  }

  SUBCASE("negative samples contain no foreground motif pixels") {
    GenSource src{12345, 48, 64};
    ImageTensor full = render_synthetic(tax, tax.negative_class_id(), src);
    ImageTensor bg = render_synthetic(tax, tax.negative_class_id(), src, /*background_only=*/true);
    CHECK(full == bg);
    // while a weed class does add pixels over the same background
    ImageTensor weed = render_synthetic(tax, tax.id_of("D."), src);
    ImageTensor weed_bg = render_synthetic(tax, tax.id_of("D."), src, true);
    CHECK_FALSE(weed == weed_bg);
  }

  SUBCASE("count must be positive and size at least 32x32") {
    CorpusSpec spec = CorpusSpec::uniform(tax, 5, 16, 16);
    CHECK_THROWS_AS(generate_synthetic_corpus(spec, 1, tax), Error);
    CorpusSpec zero = CorpusSpec::uniform(tax, 5, 48, 48);
    zero.counts[3] = 0;
    CHECK_THROWS_AS(generate_synthetic_corpus(zero, 1, tax), Error);
  }
}
