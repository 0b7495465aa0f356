#include "stwave_app/app.hpp"

int main(int argc, char** argv)
{
    return stwave::app::run_cli(argc, argv);
}
