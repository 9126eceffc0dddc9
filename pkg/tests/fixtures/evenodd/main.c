#include "eo.h"
#include "report.h"

int main(void)
{
    int n = 6;
    int parity = even(n);
    report(n, parity);
    return 0;
}
