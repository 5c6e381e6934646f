#include <functional>
#include <set>

#include <doctest.h>

#include "helpers.hpp"
#include "vppsim/casefmt.hpp"

using namespace vppsim;

namespace {

const char* kTwoBusMatpower = R"(function mpc = two
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	135	1	1.1	0.9;
	2	1	100	0	0	0	1	1	0	135	1	1.1	0.9;
];
mpc.gen = [
	1	0	0	300	-300	1	100	1	250	10	0	0	0	0	0	0	0	0	0	0	0;
];
mpc.branch = [
	1	2	0	0.1	0	250	250	250	0	0	1	-360	360;
];
)";

CaseErrorKind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const CaseError& e) {
    return e.kind();
  }
  FAIL("no CaseError thrown");
  return CaseErrorKind::SchemaViolation;
}

}  // namespace

TEST_CASE("matpower two-bus field mapping") {
  const Network net = parse_matpower_case(kTwoBusMatpower);
  REQUIRE(net.buses.size() == 2);
  REQUIRE(net.branches.size() == 1);
  CHECK(net.base_mva == 100.0);
  CHECK(net.buses[0].kind == BusKind::Slack);
  CHECK(net.buses[1].kind == BusKind::PQ);
  CHECK(net.buses[1].p_load == 100.0);
  CHECK(net.branches[0].r == 0.0);
  CHECK(net.branches[0].x == 0.1);
  CHECK(net.branches[0].tap == 1.0);
  CHECK(net.gens.size() == 1);
  CHECK(net.slack_index == 0);
}

TEST_CASE("matpower errors") {
  CHECK(error_kind([] { parse_matpower_case(""); }) == CaseErrorKind::MissingSection);
  std::string bad_ref = kTwoBusMatpower;
  bad_ref.replace(bad_ref.find("\t1\t0\t0\t300"), 2, "\t99");
  CHECK(error_kind([&] { parse_matpower_case(bad_ref); }) == CaseErrorKind::UnknownBusReference);
  std::string ragged = kTwoBusMatpower;
  ragged.replace(ragged.find("2\t1\t100\t0"), 9, "2\t1");
  CHECK(error_kind([&] { parse_matpower_case(ragged); }) == CaseErrorKind::MalformedMatrix);
  std::string dup = kTwoBusMatpower;
  dup.replace(dup.find("\n\t2\t1\t100"), 3, "\n\t1");
  CHECK(error_kind([&] { parse_matpower_case(dup); }) == CaseErrorKind::DuplicateBusId);
}

TEST_CASE("case118 loads") {
  const Network net = load_case(testing::preset("case118.m"));
  CHECK(net.buses.size() == 118);
  CHECK(net.branches.size() == 186);
  CHECK(net.gens.size() == 54);
  CHECK(net.buses[net.slack_index].id == 69);
  CHECK(validate(net).empty());

  const Network der = load_case(testing::preset("case118.m"), CaseFormat::Auto, testing::preset("case118_der.toml"));
  CHECK(der.gens.size() == 54 - 2 + 12);
  CHECK(der.der_count() == 12);
  CHECK(der.buses[der.gens[der.ders[0].gen].bus].id == 10);
  CHECK(der.buses[der.gens[der.ders[11].gen].bus].id == 25);
}

TEST_CASE("serial preset") {
  const Network net = load_case(testing::preset("serial.case"));
  CHECK(net.buses.size() == 12);
  CHECK(net.gens.size() == 120);
  CHECK(net.der_count() == 120);
  CHECK(net.buses[net.slack_index].id == 1);
  int load_buses = 0;
  for (const auto& b : net.buses)
    if (b.p_load > 0.0) {
      ++load_buses;
      CHECK(b.p_load == 500.0);
    }
  CHECK(load_buses == 1);
  for (const auto& g : net.gens) CHECK(g.p_out == 5.0);
  std::set<int> der_buses;
  for (const auto& d : net.ders) der_buses.insert(net.buses[net.gens[d.gen].bus].id);
  CHECK(der_buses.size() == 10);
}

TEST_CASE("bus3 preset") {
  const Network net = load_case(testing::preset("bus3.case"));
  CHECK(net.buses.size() == 3);
  CHECK(net.der_count() == 10);
  for (const auto& d : net.ders) CHECK(net.buses[net.gens[d.gen].bus].id == 1);
  CHECK(net.buses[net.slack_index].id == 2);
  CHECK(net.buses[*net.bus_index(3)].p_load > 0.0);
}

TEST_CASE("native schema") {
  std::string text = testing::two_bus_text(100.0);
  std::string tapped = text;
  tapped.replace(tapped.find("x = 0.1"), 7, "x = 0.1, tap = 0.0");
  CHECK(error_kind([&] { parse_native_case(tapped); }) == CaseErrorKind::SchemaViolation);
  std::string unknown = text + "extra = 1\n";
  CHECK(error_kind([&] { parse_native_case(unknown); }) == CaseErrorKind::SchemaViolation);
  std::string no_bus = "gen = []\nbranch = []\n";
  CHECK(error_kind([&] { parse_native_case(no_bus); }) == CaseErrorKind::MissingSection);
  std::string dangling = text;
  dangling.replace(dangling.find("to = 2"), 6, "to = 7");
  CHECK(error_kind([&] { parse_native_case(dangling); }) == CaseErrorKind::UnknownBusReference);
}

TEST_CASE("native round trip") {
  const Network two = testing::two_bus();
  CHECK(parse_native_case(serialize_native_case(two)) == two);
  for (const char* p : {"serial.case", "bus3.case"}) {
    const Network net = load_case(testing::preset(p));
    CHECK(parse_native_case(serialize_native_case(net)) == net);
  }
  const Network big = load_case(testing::preset("case118.m"), CaseFormat::Auto, testing::preset("case118_der.toml"));
  CHECK(parse_native_case(serialize_native_case(big)) == big);
  const Network stock = load_case(testing::preset("case118.m"));
  const Network back = parse_native_case(serialize_native_case(stock));
  CHECK(back == stock);
  CHECK(validate(back).empty());
}

TEST_CASE("matpower export round trip") {
  const Network stock = load_case(testing::preset("case118.m"));
  const Network back = parse_matpower_case(serialize_matpower_case(stock));
  CHECK(back.buses == stock.buses);
  CHECK(back.branches == stock.branches);
  CHECK(back.gens.size() == stock.gens.size());
}

TEST_CASE("validate lists invariant violations") {
  Network net = testing::two_bus();
  net.buses[0].kind = BusKind::PQ;
  net.branches[0].x = 0.0;
  CHECK(validate(net).size() >= 2);
}
