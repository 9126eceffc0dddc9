"""Names provided by the standard C library headers.

Calls to these never need a project definition; they become boundary
symbols that any host satisfies by linking against libc.
"""

from __future__ import annotations

FUNCTIONS = frozenset(
    """
    printf fprintf sprintf snprintf vprintf vfprintf vsprintf vsnprintf puts fputs
    putchar fputc putc getchar fgetc getc fgets gets ungetc scanf fscanf sscanf
    fopen fclose fflush fread fwrite fseek ftell rewind feof ferror clearerr
    perror remove rename tmpfile setvbuf setbuf
    malloc calloc realloc free exit abort atexit atoi atol atoll atof strtol
    strtoul strtoll strtoull strtod abs labs div qsort bsearch rand srand getenv
    system
    strlen strcpy strncpy strcat strncat strcmp strncmp strchr strrchr strstr
    strdup strndup strtok strspn strcspn strpbrk strerror memcpy memmove memset
    memcmp memchr
    isalpha isdigit isalnum isspace isupper islower isprint ispunct isxdigit
    iscntrl isgraph toupper tolower
    time clock difftime mktime localtime gmtime strftime ctime
    sqrt pow fabs floor ceil fmod sin cos tan exp log log10
    read write open close lseek unlink access getpid isatty sleep usleep
    assert
    """.split()
)

VARIABLES = frozenset(
    """
    stdin stdout stderr errno NULL EOF BUFSIZ SEEK_SET SEEK_CUR SEEK_END
    EXIT_SUCCESS EXIT_FAILURE RAND_MAX CHAR_BIT CHAR_MAX CHAR_MIN INT_MAX INT_MIN
    UINT_MAX LONG_MAX LONG_MIN SIZE_MAX true false
    """.split()
)

# header that declares each function, used when a synthesized file needs one
HEADERS = {
    "stdio.h": "printf fprintf sprintf snprintf puts fputs putchar fputc putc getchar fgetc getc fgets "
    "ungetc scanf fscanf sscanf fopen fclose fflush fread fwrite fseek ftell rewind feof ferror "
    "perror remove rename stdin stdout stderr EOF BUFSIZ",
    "stdlib.h": "malloc calloc realloc free exit abort atoi atol atof strtol strtoul abs labs qsort "
    "bsearch rand srand getenv system EXIT_SUCCESS EXIT_FAILURE RAND_MAX",
    "string.h": "strlen strcpy strncpy strcat strncat strcmp strncmp strchr strrchr strstr strdup "
    "strtok strspn strcspn strerror memcpy memmove memset memcmp memchr",
    "ctype.h": "isalpha isdigit isalnum isspace isupper islower isprint ispunct isxdigit toupper tolower",
}


def is_libc(name: str) -> bool:
    return name in FUNCTIONS or name in VARIABLES


def header_for(name: str) -> str | None:
    for header, names in HEADERS.items():
        if name in names.split():
            return header
    return None
