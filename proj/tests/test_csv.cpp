#include "ocm/csv.hpp"

#include <gtest/gtest.h>

#include <clocale>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

using namespace ocm;

TEST(Csv, FormatsDoublesRoundTrip) {
    for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 6.3278e-3, 1e-300, 123456789.123456789}) {
        const auto s = format_double(v);
        EXPECT_EQ(parse_double(s), v) << s;
    }
    EXPECT_EQ(format_double(0.5), "0.5");
    EXPECT_EQ(format_int(-42), "-42");
}

TEST(Csv, FormattingIgnoresLocale) {
    const char* previous = std::setlocale(LC_NUMERIC, nullptr);
    const std::string saved = previous ? previous : "C";
    if (!std::setlocale(LC_NUMERIC, "de_DE.UTF-8"))
        GTEST_SKIP() << "de_DE locale not installed";
    EXPECT_EQ(format_double(0.25), "0.25");
    EXPECT_EQ(parse_double("0.25"), 0.25);
    std::setlocale(LC_NUMERIC, saved.c_str());
}

TEST(Csv, WritesHeaderAndRows) {
    CsvTable t;
    t.header = {"rho", "iterations"};
    t.add_row({"1000", "6"});
    t.add_row({"2000", "6"});
    EXPECT_EQ(to_csv_string(t), "rho,iterations\n1000,6\n2000,6\n");
}

TEST(Csv, EscapesSpecialCells) {
    CsvTable t;
    t.header = {"a,b", "say \"hi\""};
    t.add_row({"line\nbreak", "plain"});
    const auto text = to_csv_string(t);
    EXPECT_EQ(text, "\"a,b\",\"say \"\"hi\"\"\"\n\"line\nbreak\",plain\n");
    const auto back = parse_csv(text);
    EXPECT_EQ(back.header, t.header);
    EXPECT_EQ(back.rows, t.rows);
}

TEST(Csv, RaggedRowRejected) {
    CsvTable t;
    t.header = {"a", "b"};
    t.add_row({"1"});
    EXPECT_THROW(to_csv_string(t), ArgumentError);
}

TEST(Csv, EmptyTable) {
    CsvTable t;
    t.header = {"x"};
    EXPECT_EQ(to_csv_string(t), "x\n");
    EXPECT_TRUE(parse_csv("").header.empty());
    EXPECT_TRUE(parse_csv("x\n").rows.empty());
}

TEST(Csv, ParsesCrlfAndMissingFinalNewline) {
    const auto t = parse_csv("a,b\r\n1,2\r\n3,");
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[1], (std::vector<std::string>{"3", ""}));
    EXPECT_THROW(parse_csv("\"open"), ArgumentError);
}

TEST(Csv, FileRoundTrip) {
    const auto path = (std::filesystem::temp_directory_path() / "ocm_csv_roundtrip.csv").string();
    CsvTable t;
    t.header = {"n", "value"};
    for (int i = 0; i < 5; ++i)
        t.add_row({format_int(i), format_double(std::sqrt(i + 0.5))});
    emit_csv(t, path);
    const auto back = read_csv(path);
    EXPECT_EQ(back.rows, t.rows);
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        EXPECT_EQ(parse_double(back.rows[i][1]), std::sqrt(static_cast<double>(i) + 0.5));
    std::remove(path.c_str());
    EXPECT_THROW(read_csv(path), Error);
}

TEST(Csv, ParseDoubleRejectsGarbage) {
    EXPECT_THROW(parse_double("1.5x"), ArgumentError);
    EXPECT_THROW(parse_double(""), ArgumentError);
    EXPECT_TRUE(std::isinf(parse_double("inf")));
}
