#include <math.h>
#include <stdio.h>
#include <string.h>

#include "dataloop.h"

#define CHECK(cond)                                         \
  do {                                                      \
    if (!(cond)) {                                          \
      fprintf(stderr, "check failed line %d: %s\n", __LINE__, #cond); \
      return 1;                                             \
    }                                                       \
  } while (0)

int main(void) {
  const char csv[] = "a,b\n1,x\n2,y\n3,\n";
  DlProfile *p = NULL;
  CHECK(dl_profile_from_bytes("t.csv", (const uint8_t *)csv, strlen(csv), &p) == DL_STATUS_OK);
  CHECK(dl_profile_n_rows(p) == 3);
  CHECK(dl_profile_n_cols(p) == 2);
  char *json = NULL;
  CHECK(dl_profile_to_json(p, &json) == DL_STATUS_OK);
  CHECK(strstr(json, "\"n_rows\"") != NULL);
  dl_string_free(json);
  dl_profile_free(p);

  double acc = 0.0;
  CHECK(dl_accuracy(0, 0, 0, 0, &acc) == DL_STATUS_DOMAIN);
  CHECK(dl_last_error() != NULL);
  CHECK(dl_accuracy(3, 1, 0, 0, &acc) == DL_STATUS_OK && fabs(acc - 1.0) < 1e-12);

  DlKnowledgeBase *kb = NULL;
  CHECK(dl_kb_new_in_memory(&kb) == DL_STATUS_OK);
  char *id = NULL;
  CHECK(dl_kb_add(kb, "plot a histogram", "df.hist()", &id) == DL_STATUS_OK);
  CHECK(dl_kb_len(kb) == 1);
  char *m = NULL;
  CHECK(dl_kb_match(kb, "plot a histogram", NAN, &m) == DL_STATUS_OK);
  CHECK(strstr(m, id) != NULL);
  dl_string_free(m);
  dl_string_free(id);
  dl_kb_free(kb);

  printf("c smoke ok %s\n", dl_version());
  return 0;
}
