#include <catch2/catch_amalgamated.hpp>

#include "moecov/expr.hpp"

using moecov::GrammarConfig;
using moecov::KernelExpr;
using moecov::Node;
using moecov::NodeKind;

TEST_CASE("node metadata partitions terminals and operators") {
    for (NodeKind k : moecov::kTerminalKinds) {
        CHECK(moecov::is_terminal(k));
        CHECK_FALSE(moecov::is_operator(k));
        CHECK(moecov::arity(k) == 0);
    }
    for (NodeKind k : moecov::kOperatorKinds) {
        CHECK(moecov::is_operator(k));
        CHECK_FALSE(moecov::is_terminal(k));
        CHECK(moecov::arity(k) >= 1);
    }
    CHECK(moecov::arity(NodeKind::Add) == 2);
    CHECK(moecov::arity(NodeKind::Mul) == 2);
    CHECK(moecov::arity(NodeKind::ExpNeg) == 1);
    CHECK(moecov::arity(NodeKind::Square) == 1);
    CHECK(moecov::arity(NodeKind::Sqrt) == 1);
    CHECK(moecov::arity(NodeKind::Sin) == 1);
}

TEST_CASE("flat preorder storage is validated on construction") {
    // add(r, 1)
    CHECK_NOTHROW(KernelExpr({Node{NodeKind::Add}, Node{NodeKind::DistanceR},
                              Node{NodeKind::LiteralOne}}));
    // operator missing its second argument
    CHECK_THROWS_AS(KernelExpr({Node{NodeKind::Add}, Node{NodeKind::DistanceR}}),
                    std::invalid_argument);
    // trailing node after a complete tree
    CHECK_THROWS_AS(KernelExpr({Node{NodeKind::DistanceR}, Node{NodeKind::DistanceR}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(KernelExpr(std::vector<Node>{}), std::invalid_argument);
}

TEST_CASE("default expression is the literal one") {
    KernelExpr e;
    CHECK(e.size() == 1);
    CHECK(e.kind_at(0) == NodeKind::LiteralOne);
    CHECK(moecov::serialize(e) == "1");
}

TEST_CASE("subtree extraction and replacement") {
    // mul(hp, expneg(square(r)))
    KernelExpr e = moecov::parse_expr("mul(hp, expneg(square(r)))");
    REQUIRE(e.size() == 5);
    CHECK(e.subtree_end(0) == 5);
    CHECK(e.subtree_end(2) == 5);

    KernelExpr inner = e.subtree(2);
    CHECK(moecov::serialize(inner) == "expneg(square(r))");

    KernelExpr swapped = e.replaced(2, moecov::parse_expr("wn"));
    CHECK(moecov::serialize(swapped) == "mul(hp, wn)");
    // the original is untouched
    CHECK(moecov::serialize(e) == "mul(hp, expneg(square(r)))");

    KernelExpr joined = KernelExpr::combine(NodeKind::Add, inner, swapped);
    CHECK(moecov::serialize(joined) == "add(expneg(square(r)), mul(hp, wn))");
}

TEST_CASE("depth bookkeeping") {
    KernelExpr leaf = moecov::parse_expr("r");
    CHECK(leaf.depth() == 0);

    KernelExpr e = moecov::parse_expr("add(r, mul(s, expneg(r)))");
    CHECK(e.depth() == 3);
    std::vector<int> want{0, 1, 1, 2, 2, 3};
    CHECK(e.node_depths() == want);
}

TEST_CASE("hyperparameter slots come in preorder with s contributing two") {
    KernelExpr e = moecov::parse_expr("add(s, mul(hp, wn))");
    auto slots = moecov::hyperparam_slots(e);
    REQUIRE(slots.size() == 4);
    CHECK(slots[0].role == moecov::SlotRole::Lengthscale);
    CHECK(slots[1].role == moecov::SlotRole::Shift);
    CHECK(slots[0].node_index == 1);
    CHECK(slots[1].node_index == 1);
    CHECK(slots[2].role == moecov::SlotRole::Constant);
    CHECK(slots[3].role == moecov::SlotRole::Noise);

    CHECK(moecov::hyperparam_slots(moecov::parse_expr("1")).empty());
    for (const auto& s : slots) {
        CHECK(s.lo == 1e-3);
        CHECK(s.hi == 1e3);
    }
}

TEST_CASE("serialization round-trips") {
    const char* cases[] = {
        "r",
        "s",
        "hp",
        "wn",
        "1",
        "add(r, 1)",
        "mul(hp, expneg(square(r)))",
        "sin(sqrt(add(mul(r, r), s)))",
        "add(add(add(r, r), add(r, r)), mul(mul(hp, wn), 1))",
    };
    for (const char* c : cases) {
        KernelExpr e = moecov::parse_expr(c);
        CHECK(moecov::serialize(e) == c);
        CHECK(moecov::parse_expr(moecov::serialize(e)) == e);
    }
}

TEST_CASE("parser accepts sloppy whitespace") {
    CHECK(moecov::parse_expr("  add( r ,1 ) ") == moecov::parse_expr("add(r, 1)"));
}

TEST_CASE("parser reports position on errors") {
    using moecov::ParseError;
    CHECK_THROWS_AS(moecov::parse_expr(""), ParseError);
    CHECK_THROWS_AS(moecov::parse_expr("bogus"), ParseError);
    CHECK_THROWS_AS(moecov::parse_expr("add(r)"), ParseError);       // missing argument
    CHECK_THROWS_AS(moecov::parse_expr("add(r, 1"), ParseError);     // unclosed paren
    CHECK_THROWS_AS(moecov::parse_expr("add(r, 1))"), ParseError);   // trailing text
    CHECK_THROWS_AS(moecov::parse_expr("r(1)"), ParseError);         // terminal with args
    CHECK_THROWS_AS(moecov::parse_expr("expneg(r, 1)"), ParseError); // too many arguments

    try {
        moecov::parse_expr("add(r, bogus)");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.position() == 7);
    }
}

TEST_CASE("random generation respects the depth cap") {
    GrammarConfig cfg;
    cfg.max_depth = 3;
    moecov::RandomSource rng(12345);
    for (int i = 0; i < 500; ++i) {
        KernelExpr e = moecov::gen_random_tree(cfg, rng);
        CHECK(e.depth() <= 3);
    }
}

TEST_CASE("depth zero forces a single terminal") {
    GrammarConfig cfg;
    cfg.max_depth = 0;
    moecov::RandomSource rng(7);
    for (int i = 0; i < 50; ++i) {
        KernelExpr e = moecov::gen_random_tree(cfg, rng);
        REQUIRE(e.size() == 1);
        CHECK(moecov::is_terminal(e.kind_at(0)));
    }
}

TEST_CASE("zero operator weights produce terminals only") {
    GrammarConfig cfg;
    cfg.operator_weights = {0, 0, 0, 0, 0, 0};
    moecov::RandomSource rng(99);
    for (int i = 0; i < 50; ++i) CHECK(moecov::gen_random_tree(cfg, rng).size() == 1);
}

TEST_CASE("weight vectors can bias generation") {
    GrammarConfig cfg;
    cfg.max_depth = 2;
    cfg.terminal_weights = {1, 0, 0, 0, 0};  // r only
    cfg.operator_weights = {0, 0, 1, 0, 0, 0};  // expneg only
    moecov::RandomSource rng(4);
    for (int i = 0; i < 100; ++i) {
        KernelExpr e = moecov::gen_random_tree(cfg, rng);
        for (std::size_t j = 0; j < e.size(); ++j) {
            NodeKind k = e.kind_at(j);
            CHECK((k == NodeKind::DistanceR || k == NodeKind::ExpNeg));
        }
    }
}

TEST_CASE("grammar validation rejects bad configs") {
    GrammarConfig cfg;
    cfg.max_depth = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = GrammarConfig{};
    cfg.terminal_weights = {0, 0, 0, 0, 0};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = GrammarConfig{};
    cfg.operator_weights[2] = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
