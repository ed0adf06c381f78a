#pragma once

// The subset of the libmysqlclient C API the adapter uses. With the client
// development headers installed the real <mysql.h> is used; otherwise these
// declarations match the 8.0 client ABI (libmysqlclient.so.21).

#ifdef POLY_MYSQL_SYSTEM_HEADER
#include <mysql.h>
#else
extern "C" {

typedef struct MYSQL MYSQL;
typedef struct MYSQL_RES MYSQL_RES;
typedef char** MYSQL_ROW;

typedef struct MYSQL_FIELD {
  char* name;
  char* org_name;
  char* table;
  char* org_table;
  char* db;
  char* catalog;
  char* def;
  unsigned long length;
  unsigned long max_length;
  unsigned int name_length;
  unsigned int org_name_length;
  unsigned int table_length;
  unsigned int org_table_length;
  unsigned int db_length;
  unsigned int catalog_length;
  unsigned int def_length;
  unsigned int flags;
  unsigned int decimals;
  unsigned int charsetnr;
  int type;
  void* extension;
} MYSQL_FIELD;

enum mysql_option {
  MYSQL_OPT_CONNECT_TIMEOUT = 0,
  MYSQL_INIT_COMMAND = 3,
  MYSQL_SET_CHARSET_NAME = 7,
  MYSQL_OPT_READ_TIMEOUT = 11,
  MYSQL_OPT_WRITE_TIMEOUT = 12,
};

int mysql_server_init(int argc, char** argv, char** groups);
bool mysql_thread_init(void);
MYSQL* mysql_init(MYSQL* mysql);
int mysql_options(MYSQL* mysql, enum mysql_option option, const void* arg);
MYSQL* mysql_real_connect(MYSQL* mysql, const char* host, const char* user, const char* passwd, const char* db,
                          unsigned int port, const char* unix_socket, unsigned long clientflag);
const char* mysql_error(MYSQL* mysql);
unsigned int mysql_errno(MYSQL* mysql);
void mysql_close(MYSQL* sock);
int mysql_real_query(MYSQL* mysql, const char* q, unsigned long length);
MYSQL_RES* mysql_store_result(MYSQL* mysql);
unsigned int mysql_num_fields(MYSQL_RES* res);
MYSQL_FIELD* mysql_fetch_fields(MYSQL_RES* res);
MYSQL_ROW mysql_fetch_row(MYSQL_RES* result);
unsigned long* mysql_fetch_lengths(MYSQL_RES* result);
void mysql_free_result(MYSQL_RES* result);
unsigned int mysql_field_count(MYSQL* mysql);
unsigned long mysql_thread_id(MYSQL* mysql);
int mysql_ping(MYSQL* mysql);
unsigned long mysql_real_escape_string(MYSQL* mysql, char* to, const char* from, unsigned long length);
int mysql_next_result(MYSQL* mysql);
}
#endif
