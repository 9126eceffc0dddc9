#include <stdio.h>
#include <stdlib.h>

unsigned int compute_checksum(char *s);
void print_header(char *label);
void list_members(char *name);
int checksum_report(char *name, int width);

static int verbose = 0;

int main(int argc, char **argv)
{
    int width = 8;
    char *name;
    if (argc < 2) {
        fprintf(stderr, "usage: mytar ARCHIVE [-l]\n");
        return 1;
    }
    name = argv[1];
    print_header(name);
    if (argc > 2) {
        list_members(name);
        return 0;
    }
    if (verbose) {
        fprintf(stderr, "checksumming %s\n", name);
    }
    checksum_report(name, width);
    return 0;
}
