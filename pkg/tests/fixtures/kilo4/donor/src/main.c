#include <stdio.h>
#include <stdlib.h>

#include "editor/status.h"
#include "term/term.h"

int main(int argc, char **argv)
{
    const char *name = argc > 1 ? argv[1] : NULL;
    int rows = argc > 2 ? atoi(argv[2]) : 0;
    int width = term_width();
    if (argc > 3) {
        term_clear();
    }
    status_line(name, rows, 1, width);
    return 0;
}
