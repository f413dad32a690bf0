#include <catch2/catch_amalgamated.hpp>

#include "testutil.hpp"

using namespace specmine;

TEST_CASE("parse accepts the documented record shapes") {
    std::string text =
        R"({"type":"tx","id":"5","block":11,"accesses":[{"m":"r","k":"block","loc":"block.number"},{"m":"w","k":"storage","loc":"A.games[1].hA"}],"events":[{"caller":"0xU1","callee":"0xA","sig":"Bet","in":[1,0,1],"out":null,"value":42,"status":"ok"}]})"
        "\n"
        R"({"type":"meta","seed":"5"})"
        "\n";
    TraceLedger ledger = parse_trace(text);
    REQUIRE(ledger.transactions.size() == 1);
    REQUIRE(ledger.seed_id == "5");
    const TransactionRecord& tx = ledger.transactions[0];
    CHECK(tx.id == "5");
    CHECK(tx.block_number == 11);
    CHECK_FALSE(tx.ghost);
    REQUIRE(tx.accesses.size() == 2);
    CHECK(tx.accesses[0].mode == AccessMode::Read);
    CHECK(tx.accesses[0].location.kind == LocationKind::BlockAttribute);
    CHECK(tx.accesses[1].location.name == "A.games[1].hA");
    CHECK(tx.accesses[0].ordinal < tx.accesses[1].ordinal);
    REQUIRE(tx.events.size() == 1);
    CHECK(tx.events[0].signature == "Bet");
    CHECK(tx.events[0].inputs == std::vector<Scalar>{Scalar(std::int64_t(1)), Scalar(std::int64_t(0)),
                                                     Scalar(std::int64_t(1))});
    CHECK_FALSE(tx.events[0].output.has_value());
    CHECK(tx.events[0].value == 42);
}

TEST_CASE("rps fixture parses to 16 transactions over blocks 7..20") {
    TraceLedger ledger = parse_trace(serialize_trace(testutil::rps_ledger()));
    REQUIRE(ledger.transactions.size() == 16);
    for (const auto& tx : ledger.transactions) CHECK_FALSE(tx.ghost);
    CHECK(ledger.transactions.front().block_number == 7);
    CHECK(ledger.transactions.back().block_number == 20);
}

TEST_CASE("empty input parses to an empty ledger") {
    CHECK(parse_trace(std::string{}).transactions.empty());
    CHECK(parse_trace(std::string{"\n  \n"}).transactions.empty());
}

TEST_CASE("parse rejects invalid input") {
    auto code_of = [](const std::string& text) {
        try {
            parse_trace(text);
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::InvalidArgument;
    };

    SECTION("non-monotonic block numbers") {
        std::string text =
            R"({"type":"tx","id":"1","block":9,"events":[{"caller":"a","callee":"b","sig":"f"}]})"
            "\n"
            R"({"type":"tx","id":"2","block":8,"events":[{"caller":"a","callee":"b","sig":"f"}]})"
            "\n";
        CHECK(code_of(text) == Errc::NonMonotonicBlockNumber);
    }
    SECTION("duplicate transaction id") {
        std::string text =
            R"({"type":"tx","id":"1","block":9,"events":[{"caller":"a","callee":"b","sig":"f"}]})"
            "\n"
            R"({"type":"tx","id":"1","block":9,"events":[{"caller":"a","callee":"b","sig":"f"}]})"
            "\n";
        CHECK(code_of(text) == Errc::DuplicateTransactionId);
    }
    SECTION("malformed JSON carries the line number") {
        try {
            parse_trace(std::string("{\"type\":\"meta\",\"seed\":\"1\"}\nnot json\n"));
            FAIL("expected MalformedRecord");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::MalformedRecord);
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }
    SECTION("unknown record type") {
        CHECK(code_of("{\"type\":\"block\"}\n") == Errc::MalformedRecord);
    }
    SECTION("error events cannot carry an output") {
        std::string text =
            R"({"type":"tx","id":"1","block":9,"events":[{"caller":"a","callee":"b","sig":"f","out":3,"status":"error"}]})"
            "\n";
        CHECK(code_of(text) == Errc::MalformedRecord);
    }
    SECTION("transactions need at least one event") {
        CHECK(code_of(R"({"type":"tx","id":"1","block":9,"events":[]})" "\n") == Errc::MalformedRecord);
    }
}

TEST_CASE("serialize/parse round-trips arbitrary unghosted ledgers") {
    Rng rng(2024);
    for (int i = 0; i < 50; ++i) {
        TraceLedger ledger = testutil::random_ledger(rng);
        if (rng.chance(0.5)) ledger.seed_id = ledger.transactions.front().id;
        CHECK(parse_trace(serialize_trace(ledger)) == ledger);
    }
    CHECK(parse_trace(serialize_trace(testutil::rps_ledger())) == testutil::rps_ledger());
}

TEST_CASE("insert_ghosts adds one ghost per populated block") {
    TraceLedger ghosted = insert_ghosts(testutil::rps_ledger());

    std::vector<std::string> ghost_ids;
    for (const auto& tx : ghosted.transactions)
        if (tx.ghost) ghost_ids.push_back(tx.id);
    CHECK(ghost_ids == std::vector<std::string>{"B7", "B9", "B10", "B11", "B12", "B13", "B14", "B15",
                                                "B16", "B17", "B20"});

    SECTION("ghosts precede the first transaction of their block") {
        for (std::size_t i = 0; i < ghosted.transactions.size(); ++i) {
            const auto& tx = ghosted.transactions[i];
            if (!tx.ghost) continue;
            REQUIRE(i + 1 < ghosted.transactions.size());
            CHECK(ghosted.transactions[i + 1].block_number == tx.block_number);
            if (i > 0) CHECK(ghosted.transactions[i - 1].block_number < tx.block_number);
        }
    }
    SECTION("ghosts write all block attributes and contain no events") {
        for (const auto& tx : ghosted.transactions) {
            if (!tx.ghost) continue;
            CHECK(tx.events.empty());
            std::set<std::string> written;
            for (const auto& a : tx.accesses) {
                CHECK(a.mode == AccessMode::Write);
                CHECK(a.location.kind == LocationKind::BlockAttribute);
                written.insert(a.location.name);
            }
            CHECK(written.count("block.number") == 1);
            CHECK(written.count("block.timestamp") == 1);
        }
    }
    SECTION("relative order of real transactions is unchanged") {
        std::vector<std::string> real;
        for (const auto& tx : ghosted.transactions)
            if (!tx.ghost) real.push_back(tx.id);
        std::vector<std::string> original;
        for (const auto& tx : testutil::rps_ledger().transactions) original.push_back(tx.id);
        CHECK(real == original);
    }
    SECTION("ghosting a ghosted ledger is rejected") {
        CHECK_THROWS_AS(insert_ghosts(ghosted), Error);
    }
}

TEST_CASE("insert_ghosts trivial cases") {
    CHECK(insert_ghosts(TraceLedger{}).transactions.empty());

    TraceLedger single;
    TransactionRecord tx;
    tx.id = "T";
    tx.block_number = 5;
    tx.events.push_back({"a", "b", "f", {}, std::nullopt, 0, EventStatus::Ok});
    single.transactions.push_back(tx);
    TraceLedger ghosted = insert_ghosts(single);
    REQUIRE(ghosted.transactions.size() == 2);
    CHECK(ghosted.transactions[0].id == "B5");
    CHECK(ghosted.transactions[0].ghost);
    CHECK(ghosted.transactions[1].id == "T");
}

TEST_CASE("slice_from_seed returns the suffix from the seed's block ghost") {
    TraceLedger ghosted = insert_ghosts(testutil::rps_ledger());

    SECTION("seed 1 retains the whole fixture") {
        TraceLedger sliced = slice_from_seed(ghosted, "1");
        CHECK(sliced.seed_id == "1");
        std::size_t non_ghost = 0;
        for (const auto& tx : sliced.transactions)
            if (!tx.ghost) ++non_ghost;
        CHECK(non_ghost == 16);
        CHECK(sliced.transactions.front().id == "B7");
    }
    SECTION("seed 8 keeps transactions 8..16 plus ghosts from B14 on") {
        TraceLedger sliced = slice_from_seed(ghosted, "8");
        std::vector<std::string> ids;
        for (const auto& tx : sliced.transactions) ids.push_back(tx.id);
        CHECK(ids == std::vector<std::string>{"B14", "8", "9", "B15", "10", "11", "B16", "12", "B17",
                                              "13", "14", "B20", "15", "16"});
    }
    SECTION("unknown seed is rejected") {
        try {
            slice_from_seed(ghosted, "999");
            FAIL("expected UnknownSeed");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::UnknownSeed);
        }
    }
    SECTION("output is a contiguous sublist of the ghosted ledger") {
        for (const char* seed : {"1", "5", "8", "16"}) {
            TraceLedger sliced = slice_from_seed(ghosted, seed);
            REQUIRE(!sliced.transactions.empty());
            auto it = std::find_if(ghosted.transactions.begin(), ghosted.transactions.end(),
                                   [&](const TransactionRecord& t) { return t.id == sliced.transactions[0].id; });
            REQUIRE(it != ghosted.transactions.end());
            for (const auto& tx : sliced.transactions) {
                REQUIRE(it != ghosted.transactions.end());
                CHECK(tx == *it);
                ++it;
            }
            CHECK(it == ghosted.transactions.end());
        }
    }
}
