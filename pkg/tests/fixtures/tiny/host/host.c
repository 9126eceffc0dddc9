#include <stdio.h>
#include <stdlib.h>

int main(int argc, char **argv)
{
    int count = 0;
    if (argc > 1) {
        count = atoi(argv[1]);
    }
    printf("host %d\n", count);
    /*@transplant:sum*/
    return 0;
}
