// Placeholder; the CLI is assembled after the library modules.
int main() { return 2; }
