#include <stdint.h>
#include <stdlib.h>
#include <string.h>

#define TABLE_SIZE 256u

struct node {
    char *key;
    int value;
    struct node *next;
};

static struct node *buckets[TABLE_SIZE];

static uint32_t fnv1a(const char *s)
{
    uint32_t h = 2166136261u;
    while (*s) {
        h ^= (uint8_t)*s++;
        h *= 16777619u;
    }
    return h;
}

int table_put(const char *key, int value)
{
    uint32_t slot = fnv1a(key) % TABLE_SIZE;
    struct node *n;
    for (n = buckets[slot]; n != NULL; n = n->next) {
        if (strcmp(n->key, key) == 0) {
            n->value = value;
            return 0;
        }
    }
    n = malloc(sizeof *n);
    if (n == NULL) {
        return -1;
    }
    n->key = strdup(key);
    n->value = value;
    n->next = buckets[slot];
    buckets[slot] = n;
    return 1;
}

int table_get(const char *key, int *out)
{
    const struct node *n = buckets[fnv1a(key) % TABLE_SIZE];
    while (n != NULL && strcmp(n->key, key) != 0) {
        n = n->next;
    }
    if (n == NULL) {
        return 0;
    }
    *out = n->value;
    return 1;
}
