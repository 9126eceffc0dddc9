#include <stdlib.h>
#include <string.h>

#include "abuf.h"

/* grow the buffer and copy s onto its end */
void ab_append(struct abuf *ab, const char *s, int len)
{
    char *grown = realloc(ab->b, ab->len + len);
    if (grown == NULL) {
        return;
    }
    memcpy(grown + ab->len, s, len);
    ab->b = grown;
    ab->len += len;
}

void ab_free(struct abuf *ab)
{
    free(ab->b);
}
