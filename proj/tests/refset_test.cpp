/* SPDX-License-Identifier: Apache-2.0 */

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "nseen/error.hpp"
#include "nseen/refset.hpp"

namespace nseen {
namespace {

ReferenceSet parse(const std::string& text) {
  std::istringstream in(text);
  return parse_reference_set(in);
}

std::vector<QueryRecord> parse_queries(const std::string& text) {
  std::istringstream in(text);
  return parse_query_set(in);
}

TEST(refset, groups_names_by_id) {
  const auto r = parse("P1\tFOXP2\nP1\tFOX-P2\nP2\tRAS\n");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r.entities()[0].id.str(), "P1");
  EXPECT_EQ(r.entities()[0].names, (std::vector<std::string>{"FOXP2", "FOX-P2"}));
  EXPECT_EQ(r.entities()[1].names, (std::vector<std::string>{"RAS"}));
  EXPECT_EQ(r.name_count(), 3u);
}

TEST(refset, duplicate_lines_collapse) {
  const auto r = parse("P1\tFOXP2\nP1\tFOXP2\n");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r.entities()[0].names.size(), 1u);
}

TEST(refset, malformed_line_reports_line_number) {
  try {
    parse("# header\nP1\tFOXP2\nP1\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse("P1\tA\tB\n"), ParseError);
}

TEST(refset, empty_input_is_an_error) {
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("# only a comment\n\n"), ParseError);
}

TEST(refset, comments_blank_lines_and_crlf) {
  const auto r = parse("# c\n\nP1\tFOXP2\r\n  \nP2\tRAS\n");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r.entities()[0].names[0], "FOXP2");
}

TEST(refset, names_are_verbatim_and_ambiguity_kept) {
  const auto r = parse("P1\tRas\nP2\tras\nP3\tRas\n");
  EXPECT_EQ(r.ids_for_name("Ras"), (std::vector<EntityId>{EntityId("P1"), EntityId("P3")}));
  EXPECT_EQ(r.ids_for_name("ras"), (std::vector<EntityId>{EntityId("P2")}));
  EXPECT_TRUE(r.ids_for_name("RAS").empty());
}

TEST(refset, blank_name_or_id_rejected) {
  EXPECT_THROW(parse("P1\t  \n"), ParseError);
  EXPECT_THROW(parse(" \tFOX\n"), ParseError);
  EXPECT_THROW(EntityId(" P1"), std::invalid_argument);
  EXPECT_THROW(EntityId(""), std::invalid_argument);
}

TEST(refset, query_set_keeps_order_and_duplicates) {
  const auto q = parse_queries("FOX P2\tP1\nRAS\tP2\nFOX P2\tP1\n");
  ASSERT_EQ(q.size(), 3u);
  EXPECT_EQ(q[0], (QueryRecord{"FOX P2", EntityId("P1")}));
  EXPECT_EQ(q[2], q[0]);
  EXPECT_TRUE(parse_queries("").empty());
  EXPECT_THROW(parse_queries("a\tb\tc\n"), ParseError);
}

TEST(refset, stats) {
  const auto r = parse("P1\tFOXP2\nP1\tFOX-P2\nP2\tRAS\n");
  const auto s = reference_stats(r);
  EXPECT_EQ(s.entities, 2u);
  EXPECT_EQ(s.name_pairs, 3u);
  EXPECT_EQ(s.names_per_entity, (std::map<std::size_t, std::size_t>{{1, 1}, {2, 1}}));

  const auto five = parse("E\ta\nE\tb\nE\tc\nE\td\nE\te\n");
  EXPECT_EQ(reference_stats(five).names_per_entity, (std::map<std::size_t, std::size_t>{{5, 1}}));

  EXPECT_EQ(reference_stats(ReferenceSet{}), ReferenceStats{});
}

// Random reference sets survive a write/parse round trip, and the lookup
// and stats invariants hold on them.
TEST(refset, round_trip_and_lookup_invariants) {
  std::mt19937_64 rng(11);
  const std::string alphabet = "abAB -γ1";
  for (int trial = 0; trial < 50; ++trial) {
    ReferenceSet r;
    const int n_entities = 1 + int(rng() % 8);
    for (int e = 0; e < n_entities; ++e) {
      const int n_names = 1 + int(rng() % 5);
      for (int k = 0; k < n_names; ++k) {
        std::string name = "n";
        const int len = int(rng() % 5);
        for (int i = 0; i < len; ++i) name += alphabet[rng() % 6];
        if (rng() % 4 == 0) name += "γ";
        r.add(EntityId("E" + std::to_string(rng() % 10)), name);
      }
    }
    std::ostringstream out;
    write_reference_set(r, out);
    EXPECT_EQ(parse(out.str()), r);

    std::size_t total = 0;
    for (const auto& e : r.entities()) total += e.names.size();
    EXPECT_EQ(reference_stats(r).name_pairs, total);

    for (const auto& [name, ids] : r.name_lookup()) {
      for (const auto& id : ids) {
        const auto* e = r.find(id);
        ASSERT_NE(e, nullptr);
        EXPECT_NE(std::find(e->names.begin(), e->names.end(), name), e->names.end());
      }
    }
  }
}

}  // namespace
}  // namespace nseen
