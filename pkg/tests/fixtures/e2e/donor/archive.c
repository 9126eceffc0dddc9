#include <stdio.h>

static unsigned int mix(unsigned int h, int c)
{
    return (h * 31u + (unsigned int)c) % 65521u;
}

unsigned int compute_checksum(char *s)
{
    unsigned int h = 7;
    while (*s) {
        h = mix(h, *s);
        s++;
    }
    return h;
}

void print_header(char *label)
{
    fprintf(stderr, "mytar: archive %s\n", label);
}

void list_members(char *name)
{
    FILE *f = fopen(name, "r");
    char buf[128];
    if (f == NULL) {
        perror(name);
        return;
    }
    while (fgets(buf, sizeof buf, f) != NULL) {
        fputs(buf, stdout);
    }
    fclose(f);
}

int checksum_report(char *name, int width)
{
    unsigned int sum = compute_checksum(name);
    printf("checksum %s %*u\n", name, width, sum);
    return (int)sum;
}
