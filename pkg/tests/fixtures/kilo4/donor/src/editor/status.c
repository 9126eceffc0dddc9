#include <stdio.h>
#include <string.h>

#include "status.h"
#include "../util/abuf.h"

static int fit(int len, int width)
{
    return len > width ? width : len;
}

int status_line(const char *filename, int numrows, int dirty, int width)
{
    struct abuf ab = ABUF_INIT;
    char status[80];
    int len = snprintf(status, sizeof(status), "%.20s - %d lines%s",
                       filename ? filename : "[No Name]", numrows, dirty ? " (modified)" : "");
    len = fit(len, width);
    ab_append(&ab, "[", 1);
    ab_append(&ab, status, len);
    while (len < width) {
        ab_append(&ab, " ", 1);
        len++;
    }
    ab_append(&ab, "]", 1);
    fwrite(ab.b, 1, ab.len, stdout);
    fputc('\n', stdout);
    ab_free(&ab);
    return len;
}
