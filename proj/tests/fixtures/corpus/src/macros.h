/* Helper macros. Several of them expand to braces that must not be matched
 * against the surrounding code. */
#ifndef MACROS_H
#define MACROS_H

#define ARRAY_LEN(a) (sizeof(a) / sizeof((a)[0]))
#define MIN(a, b) ((a) < (b) ? (a) : (b))
#define MAX(a, b) ((a) > (b) ? (a) : (b))

#define BEGIN_BLOCK {
#define END_BLOCK }

#define SWAP(type, x, y) do { \
    type tmp_ = (x);          \
    (x) = (y);                \
    (y) = tmp_;               \
} while (0)

#define CHECK(cond, msg)                                   \
    if (!(cond)) {                                         \
        fprintf(stderr, "check failed: %s (%s)\n", #cond, msg); \
        abort();                                           \
    }

#if defined(__GNUC__) && (__GNUC__ >= 4)
#  define UNUSED __attribute__((unused))
#else
#  define UNUSED
#endif

static inline int clamp_int(int v, int lo, int hi)
{
    return MIN(MAX(v, lo), hi);
}

#endif /* MACROS_H */
