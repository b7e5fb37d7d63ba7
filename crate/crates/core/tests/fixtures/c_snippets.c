int x=0;
@@
int main(void)
{
    printf("hello, world\n");
    return 0;
}
@@
static int add(int a, int b) { return a + b; }
int main() { return add(1, 2); }
@@
void copy(char *dst, const char *src)
{
    while ((*dst++ = *src++) != '\0')
        ;
}
@@
a->b == c
@@
x <<= 2; y >>= 3; z ^= x | y & ~z;
@@
for (int i = 0; i < n; ++i) { sum += v[i]; }
@@
char c = '\'';
char d = '\\';
@@
const char *s = "a \"quoted\" string";
@@
/* block comment */ int k = 1; // line comment
@@
#include <stdio.h>
#include <stdlib.h>
@@
#define MAX(a, b) ((a) > (b) ? (a) : (b))
@@
struct point { int x; int y; };
struct point make_point(int x, int y) { struct point p = { x, y }; return p; }
@@
typedef struct node { int value; struct node *next; } node_t;
@@
node_t *push(node_t *head, int v)
{
    node_t *n = malloc(sizeof(node_t));
    if (n == NULL) { return head; }
    n->value = v;
    n->next = head;
    return n;
}
@@
void free_list(node_t *head)
{
    while (head) {
        node_t *next = head->next;
        free(head);
        head = next;
    }
}
@@
int fib(int n) { return n < 2 ? n : fib(n - 1) + fib(n - 2); }
@@
unsigned long hash(const char *s)
{
    unsigned long h = 5381;
    int c;
    while ((c = *s++))
        h = ((h << 5) + h) + c;
    return h;
}
@@
double mean(const double *xs, size_t n)
{
    double s = 0.0;
    for (size_t i = 0; i < n; i++) s += xs[i];
    return n ? s / n : 0.0;
}
@@
if (a && !b || c != d) { e--; } else if (f >= g) { h++; } else { i %= 3; }
@@
switch (op) {
case '+': r = a + b; break;
case '-': r = a - b; break;
default: r = 0;
}
@@
do { n /= 10; digits++; } while (n > 0);
@@
int arr[3] = {1, 2, 3};
int *p = &arr[0];
p += 2;
@@
void swap(int *a, int *b) { int t = *a; *a = *b; *b = t; }
@@
float f = 1.5e-3f; double g = 0x1Fp2; long l = 123456789L; unsigned u = 0xFFu;
@@
char buf[64];
snprintf(buf, sizeof buf, "%d-%s", 42, "x");
@@
memset(data, 'A', 100-1);
data[100-1] = '\0';
@@
char dest[50] = "";
char data[100];
memset(data, 'A', 50-1);
data[50-1] = '\0';
strcpy(dest, data);
@@
int *data = (int *)malloc(10*sizeof(int));
free(data);
free(data);
@@
int *data = (int *)malloc(10*sizeof(int));
if (data == NULL) {exit(-1);}
data[0] = 0;
free(data);
@@
goto cleanup;
cleanup:
    fclose(fp);
@@
enum color { RED, GREEN = 5, BLUE };
@@
union value { int i; float f; char c[4]; };
@@
static inline int clamp(int v, int lo, int hi) { return v < lo ? lo : v > hi ? hi : v; }
@@
extern int counter;
volatile int flag = 0;
register int r = 1;
@@
int (*fp)(int, int) = add;
int r = fp(3, 4);
@@
void helper(void);
void caller(void) { helper(); helper(); }
void helper(void) { }
@@
size_t len = strlen(s);
char *copy = strdup(s);
@@
FILE *fp = fopen("out.txt", "w");
if (!fp) return -1;
fprintf(fp, "%s\n", msg);
fclose(fp);
@@
x = y ? z : w;
@@
a[i][j] = b[j][i];
@@
int matrix[2][2] = { {1, 0}, {0, 1} };
@@
#ifdef DEBUG
    log_msg("debug");
#endif
@@
char *p = "tab\tnewline\n";
@@
while (1) { if (done()) break; continue; }
@@
int bits = (v >> 4) & 0x0F;
@@
i++; j--; ++k; --m;
@@
a += b -= c *= d /= e;
@@
result = (a < b) == (c > d);
@@
void noop() {}
@@
int sq(int v) { return v * v; }
int cube(int v) { return sq(v) * v; }
@@
long long big = 9223372036854775807LL;
@@
char empty[] = "";
@@
x = sizeof(int) + sizeof(long);
@@
ptr->next->prev = ptr;
@@
int count_bits(unsigned v) { int c = 0; while (v) { c += v & 1; v >>= 1; } return c; }
@@
qsort(items, n, sizeof *items, compare);
@@
int compare(const void *a, const void *b) { return *(const int *)a - *(const int *)b; }
@@
assert(n >= 0);
@@
char c = "abc"[1];
@@
printf("%c%c\n", 'a', '"');
@@
s = "/* not a comment */";
@@
t = "// not a comment either";
@@
/* multi
   line
   comment */
int z;
@@
x = a/b; y = a /b; w = a/ b;
@@
int main(int argc, char **argv) { return argc > 1 ? atoi(argv[1]) : 0; }
@@
void print_array(const int *a, int n)
{
    for (int i = 0; i < n; i++)
        printf("%d ", a[i]);
    putchar('\n');
}
@@
static const double PI = 3.14159265358979;
@@
double area(double r) { return PI * r * r; }
@@
int max3(int a, int b, int c) { return max2(max2(a, b), c); }
@@
buf[len - 1] = 0;
@@
if (x) y(); else z();
@@
return (int)(f * 100.0 + 0.5);
@@
void recurse(int depth) { if (depth > 0) recurse(depth - 1); }
@@
char *trim(char *s) { while (isspace((unsigned char)*s)) s++; return s; }
@@
int is_even(int n) { return (n & 1) == 0; }
@@
struct point *pp = &p; pp->x = 3; (*pp).y = 4;
@@
int a = 1, b = 2, c = 3;
@@
label: ;
@@
unsigned char byte = 0xAB;
@@
void fill(int *a, int n, int v) { for (int i = 0; i < n; i++) a[i] = v; }
@@
int total = 0;
for (int i = 0; i < 10; i++)
    for (int j = 0; j < 10; j++)
        total += i * j;
@@
char **names = calloc(n, sizeof(char *));
@@
x = !y;
z = ~w;
@@
int ok = a <= b && b <= c;
@@
int neq = a != b;
@@
m = n % 7;
@@
void log_msg(const char *fmt, ...);
@@
a = b, c = d;
@@
int v = -1;
int w = +1;
@@
ret = func1(func2(x), func3(y, z));
@@
float half = 1.0f / 2;
@@
char path[] = "C:\\temp\\file.txt";
@@
if (ptr != NULL && ptr->len > 0) process(ptr);
@@
int arr2[] = { [0] = 1, [4] = 5 };
@@
struct point origin = { .x = 0, .y = 0 };
@@
#define SQUARE(x) ((x) * (x))
int s = SQUARE(3);
@@
void *mem = realloc(old, new_size);
if (mem == NULL) { free(old); return; }
@@
int depth = tree_depth(root->left) + 1;
@@
int tree_depth(node_t *n) { return n ? 1 + tree_depth(n->next) : 0; }
@@
static void run(void) { setup(); loop(); teardown(); }
@@
int main() { run(); run(); return 0; }
@@
char grade = score >= 90 ? 'A' : score >= 80 ? 'B' : 'C';
@@
time_t now = time(NULL);
@@
srand((unsigned)time(NULL));
int r = rand() % 6 + 1;
@@
x = ((a + b) * (c - d)) / ((e % f) + 1);
@@
while (i < n && v[i] != target) i++;
@@
const int *const cp = &value;
@@
int a[10]; int *end = a + 10;
@@
printf("%5.2f%%\n", pct);
