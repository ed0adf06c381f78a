#pragma once

// Lexical scan of SQL text, enough to find identifiers and clause keywords
// without parsing any particular dialect.

#include <string>
#include <string_view>
#include <vector>

namespace poly::gap::detail {

enum class Tok { Word, Quoted, String, Number, Punct };

struct Token {
  Tok kind;
  std::string text;   // identifiers unquoted; words as written
  std::string lower;  // lower-cased text
};

std::vector<Token> scan_sql(std::string_view sql);

struct DdlTables {
  std::vector<std::string> tables;   // lower-cased
  std::vector<std::string> columns;  // lower-cased, all tables
};

/// Table and column names declared by CREATE TABLE statements.
DdlTables tables_in_ddl(std::string_view ddl);

bool is_keyword(std::string_view lower_word);

}  // namespace poly::gap::detail
